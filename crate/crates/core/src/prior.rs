//! The rescaled log-Gaussian prior: a zero-mean Matérn process on the unit
//! cube, shrunk by n^{-d/(4 alpha + 2 d)} and pushed through a link. The
//! Matérn order is tied to the Sobolev target by nu = alpha - d/2, so the
//! base process has the reproducing-kernel space the contraction theory asks
//! for.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::grid::{CubeGrid, GridError};
use crate::intensity::Intensity;
use crate::matern::{matern_cov, CovarianceError, CovarianceModel};

/// Dense Cholesky stays cheap and exact up to this many cube nodes.
const MAX_NODES: usize = 4096;
/// Diagonal jitter added once if the covariance fails to factor.
const CHOLESKY_JITTER: f64 = 1e-10;
/// exp saturates here; beyond it the link warns and caps.
const EXP_CAP: f64 = 700.0;

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("invalid prior parameter: {0}")]
    InvalidParameter(String),
    #[error("cube grid has {nodes} nodes, dense factorization capped at {max}")]
    TooManyNodes { nodes: usize, max: usize },
    #[error("covariance matrix is not positive definite even with jitter {CHOLESKY_JITTER:e}")]
    CholeskyFailure,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
}

/// Bijective links from the latent scale to intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkFunction {
    /// w -> e^w, onto (0, inf). Saturates at e^700 with a warning.
    Exponential,
    /// w -> lambda_max / (1 + e^{-w}), onto (0, lambda_max).
    ScaledSigmoid { lambda_max: f64 },
}

impl LinkFunction {
    pub fn scaled_sigmoid(lambda_max: f64) -> Result<Self, PriorError> {
        if lambda_max <= 0.0 || !lambda_max.is_finite() {
            return Err(PriorError::InvalidParameter(format!(
                "sigmoid cap must be positive, got {lambda_max}"
            )));
        }
        Ok(LinkFunction::ScaledSigmoid { lambda_max })
    }

    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            LinkFunction::Exponential => {
                if v > EXP_CAP {
                    log::warn!("latent value {v} beyond exp cap, saturating");
                    EXP_CAP.exp()
                } else {
                    v.exp()
                }
            }
            LinkFunction::ScaledSigmoid { lambda_max } => {
                if v >= 0.0 {
                    lambda_max / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    lambda_max * e / (1.0 + e)
                }
            }
        }
    }

    /// log(link(v)) without forming the intensity, stable for large |v|.
    pub fn log_apply(&self, v: f64) -> f64 {
        match *self {
            LinkFunction::Exponential => v.min(EXP_CAP),
            LinkFunction::ScaledSigmoid { lambda_max } => lambda_max.ln() - softplus(-v),
        }
    }

    /// Inverse link, for round-trip checks and truth comparisons.
    pub fn inverse(&self, rho: f64) -> f64 {
        match *self {
            LinkFunction::Exponential => rho.ln(),
            LinkFunction::ScaledSigmoid { lambda_max } => (rho / (lambda_max - rho)).ln(),
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

/// Everything that determines the prior law for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    alpha: f64,
    covariate_dim: usize,
    matern_nu: f64,
    lengthscale: f64,
    link: LinkFunction,
    cube_cells_per_axis: usize,
}

impl PriorSpec {
    /// `alpha` is the Sobolev regularity target; the Matérn order comes out
    /// as alpha - d/2 and must be positive.
    pub fn new(
        alpha: f64,
        covariate_dim: usize,
        lengthscale: f64,
        link: LinkFunction,
        cube_cells_per_axis: usize,
    ) -> Result<Self, PriorError> {
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(PriorError::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if covariate_dim == 0 {
            return Err(PriorError::InvalidParameter(
                "covariate dimension must be positive".into(),
            ));
        }
        if lengthscale <= 0.0 || !lengthscale.is_finite() {
            return Err(PriorError::InvalidParameter(format!(
                "lengthscale must be positive, got {lengthscale}"
            )));
        }
        if cube_cells_per_axis == 0 {
            return Err(PriorError::InvalidParameter(
                "cube grid needs at least one cell".into(),
            ));
        }
        let matern_nu = alpha - covariate_dim as f64 / 2.0;
        if matern_nu <= 0.0 {
            return Err(PriorError::InvalidParameter(format!(
                "alpha={alpha} with d={covariate_dim} gives Matern order {matern_nu} <= 0; need alpha > d/2"
            )));
        }
        Ok(PriorSpec {
            alpha,
            covariate_dim,
            matern_nu,
            lengthscale,
            link,
            cube_cells_per_axis,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    pub fn matern_nu(&self) -> f64 {
        self.matern_nu
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    pub fn cube_cells_per_axis(&self) -> usize {
        self.cube_cells_per_axis
    }
}

/// The prior shrinkage n^{-d/(4 alpha + 2 d)}.
pub fn rescale_factor(n: f64, alpha: f64, d: usize) -> f64 {
    debug_assert!(n > 0.0 && alpha > 0.0 && d > 0);
    let exponent = -(d as f64) / (4.0 * alpha + 2.0 * d as f64);
    n.powf(exponent)
}

/// A latent function on the cube, its shrinkage, and its link. This is the
/// object MCMC moves around and summaries average.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFunction {
    cube: CubeGrid,
    latent: Vec<f64>,
    scale: f64,
    link: LinkFunction,
}

impl IntensityFunction {
    pub fn new(
        cube: CubeGrid,
        latent: Vec<f64>,
        scale: f64,
        link: LinkFunction,
    ) -> Result<Self, PriorError> {
        if latent.len() != cube.num_nodes() {
            return Err(PriorError::InvalidParameter(format!(
                "latent has {} values, cube has {} nodes",
                latent.len(),
                cube.num_nodes()
            )));
        }
        if latent.iter().any(|v| !v.is_finite()) {
            return Err(PriorError::InvalidParameter(
                "latent contains non-finite values".into(),
            ));
        }
        if scale <= 0.0 || !scale.is_finite() {
            return Err(PriorError::InvalidParameter(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(IntensityFunction {
            cube,
            latent,
            scale,
            link,
        })
    }

    pub fn cube(&self) -> &CubeGrid {
        &self.cube
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    /// Scaled latent at z by multilinear interpolation, before the link.
    pub fn latent_at(&self, z: &[f64]) -> f64 {
        self.scale * self.cube.interp(&self.latent, z)
    }
}

impl Intensity for IntensityFunction {
    fn dim_in(&self) -> usize {
        self.cube.dim()
    }

    fn eval(&self, z: &[f64]) -> f64 {
        self.link.apply(self.latent_at(z))
    }
}

/// Base Gaussian process on the cube nodes with a cached Cholesky factor.
/// Immutable after construction; one factorization serves every draw and
/// every pCN proposal of a run.
pub struct BasePrior {
    spec: PriorSpec,
    cube: CubeGrid,
    factor: DMatrix<f64>,
    jittered: bool,
}

impl BasePrior {
    pub fn new(spec: PriorSpec) -> Result<Self, PriorError> {
        let cube = CubeGrid::new(spec.covariate_dim, spec.cube_cells_per_axis)?;
        let nodes = cube.num_nodes();
        if nodes > MAX_NODES {
            return Err(PriorError::TooManyNodes {
                nodes,
                max: MAX_NODES,
            });
        }
        let model = CovarianceModel::matern(spec.matern_nu, spec.lengthscale)?;
        log::info!(
            "base prior: Matern nu={} on {} nodes, draws are {}",
            spec.matern_nu,
            nodes,
            if spec.matern_nu > 1.0 {
                "C1"
            } else {
                "rougher than C1"
            }
        );
        let mut cov = DMatrix::zeros(nodes, nodes);
        let d = cube.dim();
        let mut xi = vec![0.0; d];
        let mut xj = vec![0.0; d];
        for i in 0..nodes {
            cube.node_coord(i, &mut xi);
            for j in 0..=i {
                cube.node_coord(j, &mut xj);
                let r = xi
                    .iter()
                    .zip(&xj)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let k = matern_cov(r, &model)?;
                cov[(i, j)] = k;
                cov[(j, i)] = k;
            }
        }
        let (factor, jittered) = match Cholesky::new(cov.clone()) {
            Some(ch) => (ch.unpack(), false),
            None => {
                log::warn!("covariance not positive definite, retrying with jitter");
                for i in 0..nodes {
                    cov[(i, i)] += CHOLESKY_JITTER;
                }
                match Cholesky::new(cov) {
                    Some(ch) => (ch.unpack(), true),
                    None => return Err(PriorError::CholeskyFailure),
                }
            }
        };
        Ok(BasePrior {
            spec,
            cube,
            factor,
            jittered,
        })
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn cube(&self) -> &CubeGrid {
        &self.cube
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    /// One unscaled draw of the base process at the cube nodes.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.cube.num_nodes();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = &self.factor * z;
        w.as_slice().to_vec()
    }

    /// One draw of the full prior at sample size n: latent, shrinkage, link.
    pub fn sample_intensity<R: Rng + ?Sized>(&self, n: f64, rng: &mut R) -> IntensityFunction {
        let latent = self.sample_latent(rng);
        let scale = rescale_factor(n, self.spec.alpha, self.spec.covariate_dim);
        IntensityFunction::new(self.cube.clone(), latent, scale, self.spec.link)
            .expect("draw from a valid prior is valid")
    }
}

/// One-shot prior draw. Building [`BasePrior`] once amortizes the
/// factorization when many draws are needed.
pub fn sample_prior<R: Rng + ?Sized>(
    spec: &PriorSpec,
    n: f64,
    rng: &mut R,
) -> Result<IntensityFunction, PriorError> {
    Ok(BasePrior::new(spec.clone())?.sample_intensity(n, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::rng_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale_factor(1.0, 1.0, 1), 1.0);
        assert_relative_eq!(rescale_factor(64.0, 1.0, 1), 0.5, max_relative = 1e-12);
        assert_relative_eq!(rescale_factor(4096.0, 1.0, 2), 0.125, max_relative = 1e-12);
    }

    #[test]
    fn rescale_monotonicity() {
        // strictly decreasing in n, strictly increasing in alpha
        let ns = [2.0, 8.0, 100.0, 1e4];
        for pair in ns.windows(2) {
            assert!(rescale_factor(pair[1], 1.0, 1) < rescale_factor(pair[0], 1.0, 1));
        }
        let alphas = [0.6, 1.0, 2.0, 5.0];
        for pair in alphas.windows(2) {
            assert!(rescale_factor(100.0, pair[1], 1) > rescale_factor(100.0, pair[0], 1));
        }
    }

    #[test]
    fn spec_ties_matern_order_to_alpha() {
        let spec = PriorSpec::new(1.0, 1, 0.3, LinkFunction::Exponential, 16).unwrap();
        assert_eq!(spec.matern_nu(), 0.5);
        let spec2 = PriorSpec::new(2.0, 2, 0.3, LinkFunction::Exponential, 16).unwrap();
        assert_eq!(spec2.matern_nu(), 1.0);
        // alpha <= d/2 leaves no Matern order
        assert!(PriorSpec::new(0.5, 1, 0.3, LinkFunction::Exponential, 16).is_err());
        assert!(PriorSpec::new(1.0, 2, 0.3, LinkFunction::Exponential, 16).is_err());
        assert!(PriorSpec::new(1.0, 1, -0.3, LinkFunction::Exponential, 16).is_err());
    }

    #[test]
    fn link_values_and_round_trips() {
        let exp = LinkFunction::Exponential;
        assert_eq!(exp.apply(0.0), 1.0);
        let sig = LinkFunction::scaled_sigmoid(2.0).unwrap();
        assert_eq!(sig.apply(0.0), 1.0);
        for link in [exp, sig] {
            for i in -20..=20 {
                let v = i as f64;
                // An intensity near the sigmoid cap stores v only to about
                // e^{|v|} ulps, so the strict round-trip bound applies where
                // 64-bit floats can represent it; past that the error is
                // checked against the representation limit itself.
                let tol = match link {
                    LinkFunction::Exponential => 1e-10,
                    LinkFunction::ScaledSigmoid { .. } => {
                        1e-10f64.max(32.0 * f64::EPSILON * v.abs().exp())
                    }
                };
                assert!((link.inverse(link.apply(v)) - v).abs() < tol, "v={v}");
                assert!(link.apply(v) > 0.0);
                assert!(
                    link.apply(v + 0.5) > link.apply(v),
                    "strictly increasing at {v}"
                );
                assert_relative_eq!(link.log_apply(v), link.apply(v).ln(), max_relative = 1e-12);
            }
        }
        // saturation keeps the exponential link finite
        assert!(exp.apply(800.0).is_finite());
        assert_eq!(exp.apply(800.0), EXP_CAP.exp());
        // sigmoid stays under its cap
        assert!(sig.apply(500.0) <= 2.0);
        assert!(LinkFunction::scaled_sigmoid(0.0).is_err());
    }

    fn small_spec() -> PriorSpec {
        PriorSpec::new(1.0, 1, 0.3, LinkFunction::Exponential, 16).unwrap()
    }

    #[test]
    fn draws_are_deterministic_and_carry_the_scale() {
        let base = BasePrior::new(small_spec()).unwrap();
        let a = base.sample_intensity(64.0, &mut rng_from_seed(1));
        let b = base.sample_intensity(64.0, &mut rng_from_seed(1));
        assert_eq!(a, b);
        assert_eq!(a.scale(), rescale_factor(64.0, 1.0, 1));
        assert_eq!(a.latent().len(), 17);
        for i in 0..=50 {
            assert!(a.eval(&[i as f64 / 50.0]) > 0.0);
        }
    }

    #[test]
    fn marginal_variance_is_one() {
        let base = BasePrior::new(small_spec()).unwrap();
        let mut rng = rng_from_seed(77);
        let reps = 4000;
        let node = 9usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..reps {
            let w = base.sample_latent(&mut rng);
            sum += w[node];
            sum_sq += w[node] * w[node];
        }
        let mean = sum / reps as f64;
        let var = sum_sq / reps as f64 - mean * mean;
        // 3 standard errors of a variance estimate from iid normals
        let tol = 3.0 * (2.0 / reps as f64).sqrt();
        assert!((var - 1.0).abs() < tol, "variance {var}, tolerance {tol}");
    }

    #[test]
    fn sigmoid_draws_respect_the_cap() {
        let spec =
            PriorSpec::new(1.0, 1, 0.3, LinkFunction::scaled_sigmoid(5.0).unwrap(), 16).unwrap();
        let base = BasePrior::new(spec).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            let rho = base.sample_intensity(256.0, &mut rng);
            for i in 0..=64 {
                let v = rho.eval(&[i as f64 / 64.0]);
                assert!(v > 0.0 && v < 5.0);
            }
        }
    }

    #[test]
    fn smooth_covariances_still_factor() {
        // high smoothness makes the covariance numerically singular; the
        // jitter retry must keep construction alive
        let spec = PriorSpec::new(3.0, 1, 1.0, LinkFunction::Exponential, 64).unwrap();
        let base = BasePrior::new(spec).unwrap();
        let w = base.sample_latent(&mut rng_from_seed(4));
        assert!(w.iter().all(|v| v.is_finite()));
        assert!(w.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn node_cap_is_enforced() {
        let spec = PriorSpec::new(2.0, 2, 0.3, LinkFunction::Exponential, 80).unwrap();
        assert!(matches!(
            BasePrior::new(spec),
            Err(PriorError::TooManyNodes { nodes: 6561, .. })
        ));
    }

    #[test]
    fn evaluation_is_exact_at_nodes_and_for_constants() {
        let cube = CubeGrid::new(1, 8).unwrap();
        let latent: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let rho = IntensityFunction::new(
            cube.clone(),
            latent.clone(),
            0.25,
            LinkFunction::Exponential,
        )
        .unwrap();
        for (i, &w) in latent.iter().enumerate() {
            let z = i as f64 / 8.0;
            assert_relative_eq!(rho.eval(&[z]), (0.25 * w).exp(), max_relative = 1e-14);
        }
        let flat =
            IntensityFunction::new(cube, vec![1.3; 9], 0.5, LinkFunction::Exponential).unwrap();
        for i in 0..=20 {
            assert_relative_eq!(
                flat.eval(&[i as f64 / 20.0]),
                (0.5 * 1.3f64).exp(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn interpolation_agrees_with_a_finer_grid() {
        // band-limited latent sampled at two resolutions; the coarse
        // evaluation must track the fine one everywhere
        let f = |z: f64| {
            0.3 * (2.0 * std::f64::consts::PI * z).sin()
                + 0.2 * (4.0 * std::f64::consts::PI * z).cos()
        };
        let build = |cells: usize| {
            let cube = CubeGrid::new(1, cells).unwrap();
            let latent: Vec<f64> = (0..=cells).map(|i| f(i as f64 / cells as f64)).collect();
            IntensityFunction::new(cube, latent, 1.0, LinkFunction::Exponential).unwrap()
        };
        let coarse = build(128);
        let fine = build(1280);
        let mut max_dev = 0.0f64;
        for i in 0..=1000 {
            let z = [i as f64 / 1000.0];
            max_dev = max_dev.max((coarse.eval(&z) - fine.eval(&z)).abs());
        }
        assert!(max_dev < 1e-3, "max deviation {max_dev}");
    }

    #[test]
    fn latent_shape_is_validated() {
        let cube = CubeGrid::new(1, 8).unwrap();
        assert!(
            IntensityFunction::new(cube.clone(), vec![0.0; 8], 1.0, LinkFunction::Exponential)
                .is_err()
        );
        assert!(IntensityFunction::new(
            cube.clone(),
            vec![f64::NAN; 9],
            1.0,
            LinkFunction::Exponential
        )
        .is_err());
        assert!(
            IntensityFunction::new(cube, vec![0.0; 9], 0.0, LinkFunction::Exponential).is_err()
        );
    }
}
