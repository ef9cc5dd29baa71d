//! The interface every intensity shape shares: a nonnegative function of the
//! covariate vector. Ground truths, posterior draws, and test stubs all come
//! through here, so simulation and scoring code never cares which one it has.

/// A nonnegative function on the covariate cube [0, 1]^d.
pub trait Intensity {
    /// Covariate dimension d the function expects.
    fn dim_in(&self) -> usize;

    /// rho(z) >= 0. Implementations may clamp z to the cube; callers pass
    /// slices of length `dim_in()`.
    fn eval(&self, z: &[f64]) -> f64;
}

/// Constant intensity, mostly a calibration and test device: with rho constant
/// the point process is homogeneous Poisson no matter the covariates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantIntensity {
    pub dim_in: usize,
    pub level: f64,
}

impl ConstantIntensity {
    pub fn new(dim_in: usize, level: f64) -> Self {
        assert!(
            level >= 0.0 && level.is_finite(),
            "constant intensity must be nonnegative"
        );
        ConstantIntensity { dim_in, level }
    }
}

impl Intensity for ConstantIntensity {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn eval(&self, _z: &[f64]) -> f64 {
        self.level
    }
}

impl<T: Intensity + ?Sized> Intensity for &T {
    fn dim_in(&self) -> usize {
        (**self).dim_in()
    }

    fn eval(&self, z: &[f64]) -> f64 {
        (**self).eval(z)
    }
}
