//! Point process sampling and scoring. Conditional on a covariate field the
//! model is inhomogeneous Poisson with intensity rho(Z(x)); both the sampler
//! and the log-likelihood discretize on the covariate grid, so the data term
//! and the integral term see exactly the same intensity.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::covariates::CovariateField;
use crate::grid::{GridError, SpatialGrid};
use crate::intensity::Intensity;
use crate::prior::LinkFunction;

/// Evaluations of a ground truth above this level are capped with a warning;
/// none of the registry functions comes close under either link.
const RHO_CAP: f64 = 1e6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("intensity must be nonnegative and finite, got {value} at cell {cell}")]
    InvalidIntensity { cell: usize, value: f64 },
    #[error("point {index} lies outside the window")]
    PointOutsideWindow { index: usize },
    #[error("coordinate buffer length {len} is not a multiple of dimension {dim}")]
    RaggedCoordinates { len: usize, dim: usize },
    #[error("covariate field shape ({field_dim}, {field_cells}) does not match grid ({grid_dim}, {grid_cells})")]
    ShapeMismatch {
        field_dim: usize,
        field_cells: usize,
        grid_dim: usize,
        grid_cells: usize,
    },
    #[error("unknown ground truth {0:?}")]
    UnknownGroundTruth(String),
    #[error("smoothness beta={beta} violates beta > min(1, d/2) for d={d}")]
    SmoothnessTooLow { beta: f64, d: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// A realized point pattern together with the window it lives in.
/// Coordinates are flat, point-major: `coords[i*D..(i+1)*D]` is point i.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    window: SpatialGrid,
    coords: Vec<f64>,
}

impl PointPattern {
    pub fn new(window: SpatialGrid, coords: Vec<f64>) -> Result<Self, ModelError> {
        let dim = window.dim();
        if !coords.len().is_multiple_of(dim) {
            return Err(ModelError::RaggedCoordinates {
                len: coords.len(),
                dim,
            });
        }
        for (index, p) in coords.chunks_exact(dim).enumerate() {
            let inside = p
                .iter()
                .all(|&c| c.is_finite() && c >= window.lower() && c <= window.upper());
            if !inside {
                return Err(ModelError::PointOutsideWindow { index });
            }
        }
        Ok(PointPattern { window, coords })
    }

    pub fn window(&self) -> &SpatialGrid {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn count(&self) -> usize {
        self.coords.len() / self.window.dim()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.window.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.window.dim())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Named latent test functions w0 on [0,1]^d, linked into intensities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TruthKind {
    /// Product of sin(2 pi z_h): smooth, so any nominal beta applies.
    Sine,
    /// Lacunary cosine series with coefficients 2^{-j(beta+1/2)}, level 8:
    /// nominal finite smoothness beta.
    Fourier,
    /// w0 = 0, so rho0 = link(0).
    Flat,
    /// rho0 = 0 everywhere. Test stub, exempt from positivity.
    Zero,
}

/// Ground truth: a registry function, its nominal smoothness, and the link
/// producing rho0 = link(w0). Implements [`Intensity`].
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSpec {
    kind: TruthKind,
    name: &'static str,
    covariate_dim: usize,
    beta: f64,
    link: LinkFunction,
}

impl GroundTruthSpec {
    /// Looks up `name` in the registry: "sine", "fourier", "flat", "zero".
    pub fn from_name(
        name: &str,
        covariate_dim: usize,
        beta: f64,
        link: LinkFunction,
    ) -> Result<Self, ModelError> {
        let (kind, canonical) = match name {
            "sine" => (TruthKind::Sine, "sine"),
            "fourier" => (TruthKind::Fourier, "fourier"),
            "flat" => (TruthKind::Flat, "flat"),
            "zero" => (TruthKind::Zero, "zero"),
            other => return Err(ModelError::UnknownGroundTruth(other.to_string())),
        };
        let floor = 1.0f64.min(covariate_dim as f64 / 2.0);
        if beta.is_nan() || beta <= floor {
            return Err(ModelError::SmoothnessTooLow {
                beta,
                d: covariate_dim,
            });
        }
        Ok(GroundTruthSpec {
            kind,
            name: canonical,
            covariate_dim,
            beta,
            link,
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    /// The latent w0 before the link. Zero stub has no latent; it reports 0
    /// but `eval` bypasses the link.
    pub fn latent(&self, z: &[f64]) -> f64 {
        match self.kind {
            TruthKind::Sine => z
                .iter()
                .map(|&zh| (2.0 * std::f64::consts::PI * zh).sin())
                .product(),
            TruthKind::Fourier => {
                let mut acc = 0.0;
                for &zh in z {
                    for j in 1..=8u32 {
                        let coeff = 2.0f64.powf(-(j as f64) * (self.beta + 0.5));
                        let freq = 2.0f64.powi(j as i32 - 1);
                        acc += coeff * (2.0 * std::f64::consts::PI * freq * zh).cos();
                    }
                }
                acc
            }
            TruthKind::Flat | TruthKind::Zero => 0.0,
        }
    }
}

impl Intensity for GroundTruthSpec {
    fn dim_in(&self) -> usize {
        self.covariate_dim
    }

    fn eval(&self, z: &[f64]) -> f64 {
        if self.kind == TruthKind::Zero {
            return 0.0;
        }
        let rho = self.link.apply(self.latent(z));
        if rho > RHO_CAP {
            log::warn!(
                "ground truth {} exceeded cap {RHO_CAP:e}; clamping",
                self.name
            );
            return RHO_CAP;
        }
        rho
    }
}

/// Evaluates rho at every cell's covariates: the per-cell intensity array
/// lambda[cell] = rho(Z(cell)).
pub fn intensity_field<I: Intensity>(
    rho: &I,
    covariates: &CovariateField,
) -> Result<Vec<f64>, ModelError> {
    let d = covariates.covariate_dim();
    let mut z = vec![0.0; d];
    let mut out = Vec::with_capacity(covariates.num_cells());
    for cell in 0..covariates.num_cells() {
        covariates.at_cell(cell, &mut z);
        let value = rho.eval(&z);
        if !value.is_finite() || value < 0.0 {
            return Err(ModelError::InvalidIntensity { cell, value });
        }
        out.push(value);
    }
    Ok(out)
}

/// Riemann sum of the intensity over the window: sum of lambda * h^D.
pub fn total_mass(intensity: &[f64], grid: &SpatialGrid) -> f64 {
    intensity.iter().sum::<f64>() * grid.cell_volume()
}

/// Draws a pattern from the piecewise-constant intensity: per cell a Poisson
/// count with mean lambda * h^D, each point uniform in its cell. Pure
/// function of the inputs and the RNG state.
pub fn sample_points<R: Rng + ?Sized>(
    intensity: &[f64],
    grid: &SpatialGrid,
    rng: &mut R,
) -> Result<PointPattern, ModelError> {
    let dim = grid.dim();
    let cell_vol = grid.cell_volume();
    let mut coords = Vec::new();
    let mut center = vec![0.0; dim];
    for (cell, &lambda) in intensity.iter().enumerate() {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(ModelError::InvalidIntensity {
                cell,
                value: lambda,
            });
        }
        let mean = lambda * cell_vol;
        if mean == 0.0 {
            continue;
        }
        let count = Poisson::new(mean)
            .map_err(|_| ModelError::InvalidIntensity {
                cell,
                value: lambda,
            })?
            .sample(rng) as usize;
        if count == 0 {
            continue;
        }
        grid.cell_center(cell, &mut center);
        for _ in 0..count {
            for &c in &center {
                let u: f64 = rng.gen();
                coords.push(c + (u - 0.5) * grid.spacing());
            }
        }
    }
    PointPattern::new(grid.clone(), coords)
}

/// The model's log-likelihood of a pattern under rho:
/// sum over points of log rho(Z(x)) minus sum over cells of rho(Z(cell)) h^D.
/// A zero intensity at an observed point gives -infinity.
pub fn log_likelihood<I: Intensity>(
    rho: &I,
    pattern: &PointPattern,
    covariates: &CovariateField,
) -> Result<f64, ModelError> {
    let grid = pattern.window();
    if covariates.dim() != grid.dim() || covariates.cells_per_axis() != grid.cells_per_axis() {
        return Err(ModelError::ShapeMismatch {
            field_dim: covariates.dim(),
            field_cells: covariates.cells_per_axis(),
            grid_dim: grid.dim(),
            grid_cells: grid.cells_per_axis(),
        });
    }
    let d = covariates.covariate_dim();
    let mut z = vec![0.0; d];
    let mut data_term = 0.0;
    for (index, point) in pattern.iter().enumerate() {
        let cell = grid.cell_of(point)?;
        covariates.at_cell(cell, &mut z);
        let value = rho.eval(&z);
        if !value.is_finite() || value < 0.0 {
            let _ = index;
            return Err(ModelError::InvalidIntensity { cell, value });
        }
        if value == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        data_term += value.ln();
    }
    let lambda = intensity_field(rho, covariates)?;
    Ok(data_term - total_mass(&lambda, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariates::build_covariates;
    use crate::grid::window_from_n;
    use crate::intensity::ConstantIntensity;
    use crate::matern::CovarianceModel;
    use crate::randfield::{FieldRealization, FieldSampler};
    use crate::streams::rng_from_seed;
    use approx::assert_relative_eq;

    fn toy_covariates(seed: u64, n: f64, cells: usize) -> (SpatialGrid, CovariateField) {
        let grid = window_from_n(n, 1, cells).unwrap();
        let model = CovarianceModel::matern(0.5, 1.0).unwrap();
        let sampler = FieldSampler::new(&grid, &model).unwrap();
        let mut rng = rng_from_seed(seed);
        let field = build_covariates(&[sampler.sample(&mut rng)]).unwrap();
        (grid, field)
    }

    #[test]
    fn pattern_validation() {
        let grid = window_from_n(100.0, 1, 10).unwrap();
        assert!(PointPattern::new(grid.clone(), vec![0.0, 49.9, -50.0]).is_ok());
        assert!(matches!(
            PointPattern::new(grid.clone(), vec![50.1]),
            Err(ModelError::PointOutsideWindow { index: 0 })
        ));
        let grid2 = window_from_n(100.0, 2, 10).unwrap();
        assert!(matches!(
            PointPattern::new(grid2, vec![0.0, 0.0, 1.0]),
            Err(ModelError::RaggedCoordinates { len: 3, dim: 2 })
        ));
    }

    #[test]
    fn constant_intensity_field_and_mass() {
        let (grid, field) = toy_covariates(1, 100.0, 200);
        let lambda = intensity_field(&ConstantIntensity::new(1, 2.5), &field).unwrap();
        assert!(lambda.iter().all(|&l| l == 2.5));
        assert_relative_eq!(total_mass(&lambda, &grid), 250.0, max_relative = 1e-9);
        assert_eq!(total_mass(&vec![0.0; 200], &grid), 0.0);
    }

    #[test]
    fn intensity_field_matches_pointwise_evaluation() {
        let (_, field) = toy_covariates(2, 50.0, 100);
        struct Ramp;
        impl Intensity for Ramp {
            fn dim_in(&self) -> usize {
                1
            }
            fn eval(&self, z: &[f64]) -> f64 {
                0.5 + z[0]
            }
        }
        let lambda = intensity_field(&Ramp, &field).unwrap();
        for cell in (0..100).step_by(7) {
            assert_eq!(lambda[cell], 0.5 + field.value(cell, 0));
        }
    }

    #[test]
    fn negative_intensity_is_a_model_error() {
        let (_, field) = toy_covariates(3, 10.0, 20);
        struct Bad;
        impl Intensity for Bad {
            fn dim_in(&self) -> usize {
                1
            }
            fn eval(&self, _z: &[f64]) -> f64 {
                -1.0
            }
        }
        assert!(matches!(
            intensity_field(&Bad, &field),
            Err(ModelError::InvalidIntensity { cell: 0, .. })
        ));
    }

    #[test]
    fn zero_intensity_samples_empty() {
        let grid = window_from_n(100.0, 1, 50).unwrap();
        let pattern = sample_points(&vec![0.0; 50], &grid, &mut rng_from_seed(4)).unwrap();
        assert_eq!(pattern.count(), 0);
    }

    #[test]
    fn sampling_is_deterministic_and_in_window() {
        let grid = window_from_n(100.0, 1, 50).unwrap();
        let lambda = vec![1.0; 50];
        let a = sample_points(&lambda, &grid, &mut rng_from_seed(5)).unwrap();
        let b = sample_points(&lambda, &grid, &mut rng_from_seed(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.count() > 50 && a.count() < 160, "count {}", a.count());
        for p in a.iter() {
            assert!(p[0] >= -50.0 && p[0] <= 50.0);
        }
    }

    #[test]
    fn mean_count_tracks_total_mass() {
        // Smoke-scale check; the full Poisson dispersion test runs in the
        // validation suite with ten thousand replicates.
        let grid = window_from_n(20.0, 1, 40).unwrap();
        let lambda = vec![1.0; 40];
        let mut rng = rng_from_seed(6);
        let reps = 2000;
        let total: usize = (0..reps)
            .map(|_| sample_points(&lambda, &grid, &mut rng).unwrap().count())
            .sum();
        let mean = total as f64 / reps as f64;
        // 3 standard errors of the mean of Poisson(20) over 2000 draws
        assert!((mean - 20.0).abs() < 0.3, "mean {mean}");
    }

    #[test]
    fn unit_intensity_log_likelihood_is_minus_n() {
        for &(n, cells) in &[(100.0, 200usize), (64.0, 128), (1000.0, 500)] {
            let (grid, field) = toy_covariates(7, n, cells);
            let lambda = vec![1.0; cells];
            let pattern = sample_points(&lambda, &grid, &mut rng_from_seed(8)).unwrap();
            let ll = log_likelihood(&ConstantIntensity::new(1, 1.0), &pattern, &field).unwrap();
            assert_relative_eq!(ll, -n, max_relative = 1e-9);
        }
    }

    #[test]
    fn empty_pattern_constant_intensity() {
        let (grid, field) = toy_covariates(9, 100.0, 200);
        let pattern = PointPattern::new(grid, vec![]).unwrap();
        let c = 3.7;
        let ll = log_likelihood(&ConstantIntensity::new(1, c), &pattern, &field).unwrap();
        assert_relative_eq!(ll, -c * 100.0, max_relative = 1e-9);
    }

    #[test]
    fn three_cell_toy_matches_hand_computation() {
        // Window of volume 3 in one dimension, three cells of width 1,
        // centers at -1, 0, 1. Covariates are hand-picked; rho doubles the
        // covariate plus a floor. Two points, in cells 0 and 2.
        let grid = window_from_n(3.0, 1, 3).unwrap();
        let field =
            crate::covariates::CovariateField::from_raw(1, 1, 3, vec![0.25, 0.5, 0.75], 0).unwrap();
        struct Affine;
        impl Intensity for Affine {
            fn dim_in(&self) -> usize {
                1
            }
            fn eval(&self, z: &[f64]) -> f64 {
                0.4 + 2.0 * z[0]
            }
        }
        let pattern = PointPattern::new(grid, vec![-1.2, 0.9]).unwrap();
        // rho per cell: 0.9, 1.4, 1.9; points hit cells 0 and 2
        let expected = 0.9f64.ln() + 1.9f64.ln() - (0.9 + 1.4 + 1.9);
        let ll = log_likelihood(&Affine, &pattern, &field).unwrap();
        assert!((ll - expected).abs() < 1e-12, "ll {ll} expected {expected}");
    }

    #[test]
    fn zero_intensity_at_a_point_gives_negative_infinity() {
        let grid = window_from_n(3.0, 1, 3).unwrap();
        let field =
            crate::covariates::CovariateField::from_raw(1, 1, 3, vec![0.25, 0.5, 0.75], 0).unwrap();
        let pattern = PointPattern::new(grid, vec![0.1]).unwrap();
        let ll = log_likelihood(&ConstantIntensity::new(1, 0.0), &pattern, &field).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn adding_a_point_shifts_the_data_term_exactly() {
        let (grid, field) = toy_covariates(10, 50.0, 100);
        struct Bump;
        impl Intensity for Bump {
            fn dim_in(&self) -> usize {
                1
            }
            fn eval(&self, z: &[f64]) -> f64 {
                1.0 + z[0] * z[0]
            }
        }
        let base = PointPattern::new(grid.clone(), vec![-10.0, 3.0]).unwrap();
        let extended = PointPattern::new(grid.clone(), vec![-10.0, 3.0, 12.25]).unwrap();
        let cell = grid.cell_of(&[12.25]).unwrap();
        let mut z = [0.0];
        field.at_cell(cell, &mut z);
        let delta = Bump.eval(&z).ln();
        let a = log_likelihood(&Bump, &base, &field).unwrap();
        let b = log_likelihood(&Bump, &extended, &field).unwrap();
        assert_relative_eq!(b - a, delta, max_relative = 1e-12);
    }

    #[test]
    fn additive_latent_shift_identity() {
        // l(exp(w+c)) - l(exp(w)) = c * count - (e^c - 1) * integral(exp(w(Z)))
        let (grid, field) = toy_covariates(11, 50.0, 100);
        struct ExpShift {
            shift: f64,
        }
        impl Intensity for ExpShift {
            fn dim_in(&self) -> usize {
                1
            }
            fn eval(&self, z: &[f64]) -> f64 {
                ((z[0] - 0.5) + self.shift).exp()
            }
        }
        let base_rho = ExpShift { shift: 0.0 };
        let lambda = intensity_field(&base_rho, &field).unwrap();
        let pattern = sample_points(&lambda, &grid, &mut rng_from_seed(12)).unwrap();
        let integral = total_mass(&lambda, &grid);
        for &c in &[0.3, -1.1, 2.0] {
            let l0 = log_likelihood(&base_rho, &pattern, &field).unwrap();
            let l1 = log_likelihood(&ExpShift { shift: c }, &pattern, &field).unwrap();
            let expected = c * pattern.count() as f64 - (c.exp() - 1.0) * integral;
            assert!((l1 - l0 - expected).abs() < 1e-9, "c={c}");
        }
    }

    #[test]
    fn ground_truth_registry() {
        let link = LinkFunction::Exponential;
        let sine = GroundTruthSpec::from_name("sine", 1, 1.0 + 1e-9, link).unwrap();
        assert_eq!(sine.name(), "sine");
        // w0(1/4) = sin(pi/2) = 1 so rho0 = e
        assert_relative_eq!(sine.eval(&[0.25]), 1.0f64.exp(), max_relative = 1e-12);
        // strictly positive everywhere
        for i in 0..=100 {
            assert!(sine.eval(&[i as f64 / 100.0]) > 0.0);
        }

        let flat = GroundTruthSpec::from_name("flat", 1, 2.0, link).unwrap();
        assert_eq!(flat.eval(&[0.77]), 1.0);

        let zero = GroundTruthSpec::from_name("zero", 1, 2.0, link).unwrap();
        assert_eq!(zero.eval(&[0.5]), 0.0);

        let fourier = GroundTruthSpec::from_name("fourier", 1, 1.5, link).unwrap();
        // independent evaluation of the series at z = 0: sum of coefficients
        let expected: f64 = (1..=8).map(|j| 2.0f64.powf(-(j as f64) * 2.0)).sum();
        assert_relative_eq!(fourier.latent(&[0.0]), expected, max_relative = 1e-12);

        assert!(matches!(
            GroundTruthSpec::from_name("nope", 1, 2.0, link),
            Err(ModelError::UnknownGroundTruth(_))
        ));
        // beta floor: min(1, d/2) = 0.5 in d = 1, = 1 in d = 2
        assert!(GroundTruthSpec::from_name("sine", 1, 0.4, link).is_err());
        assert!(GroundTruthSpec::from_name("sine", 1, 0.6, link).is_ok());
        assert!(GroundTruthSpec::from_name("sine", 2, 0.9, link).is_err());
    }

    #[test]
    fn two_dimensional_sampling_and_likelihood() {
        let grid = window_from_n(64.0, 2, 16).unwrap();
        let model = CovarianceModel::matern(1.5, 2.0).unwrap();
        let sampler = FieldSampler::new(&grid, &model).unwrap();
        let mut rng = rng_from_seed(13);
        let field =
            build_covariates(&[sampler.sample(&mut rng), sampler.sample(&mut rng)]).unwrap();
        let truth = GroundTruthSpec::from_name("sine", 2, 1.1, LinkFunction::Exponential).unwrap();
        let lambda = intensity_field(&truth, &field).unwrap();
        let pattern = sample_points(&lambda, &grid, &mut rng).unwrap();
        for p in pattern.iter() {
            assert!(p.iter().all(|&c| c.abs() <= 4.0));
        }
        let ll = log_likelihood(&truth, &pattern, &field).unwrap();
        assert!(ll.is_finite());
        let unit = log_likelihood(&ConstantIntensity::new(2, 1.0), &pattern, &field).unwrap();
        assert_relative_eq!(unit, -64.0, max_relative = 1e-9);
    }

    #[test]
    fn latent_field_stub_shapes() {
        let bad = FieldRealization {
            dim: 1,
            cells_per_axis: 3,
            values: vec![0.0; 3],
        };
        let field = build_covariates(&[bad]).unwrap();
        let grid = window_from_n(4.0, 1, 4).unwrap();
        let pattern = PointPattern::new(grid, vec![]).unwrap();
        assert!(matches!(
            log_likelihood(&ConstantIntensity::new(1, 1.0), &pattern, &field),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }
}
