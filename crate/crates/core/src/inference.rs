//! Posterior sampling with a preconditioned Crank-Nicolson walk. Proposals
//! mix the current latent with a fresh base-prior draw, so the kernel is
//! reversible for the prior and the acceptance ratio needs only likelihood
//! values. Step size adapts during burn-in and is frozen afterwards, keeping
//! the post-burn-in kernel a fixed Markov kernel with the right target.

use rand::Rng;
use thiserror::Error;

use crate::covariates::CovariateField;
use crate::coxmodel::{ModelError, PointPattern};
use crate::grid::{CubeGrid, GridError, InterpStencil};
use crate::intensity::Intensity;
use crate::metrics::{l1_distance, MetricError};
use crate::prior::{BasePrior, IntensityFunction, PriorError};
use crate::streams::stream_rng;

/// Cached likelihood is recomputed at this cadence and must agree to
/// [`CACHE_TOLERANCE`], else the run stops.
const SPOT_CHECK_INTERVAL: u64 = 1000;
const CACHE_TOLERANCE: f64 = 1e-8;
/// A chain whose post-burn-in acceptance falls below this aborts.
const MIN_ACCEPTANCE: f64 = 0.01;
/// Burn-in adaptation multiplies the step by this factor (or its inverse).
const ADAPT_FACTOR: f64 = 1.1;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("post-burn-in acceptance rate {rate:.4} below {MIN_ACCEPTANCE}")]
    LowAcceptance { rate: f64 },
    #[error("cached log-likelihood drifted at iteration {iteration}: cached {cached}, recomputed {recomputed}")]
    CacheDrift {
        iteration: u64,
        cached: f64,
        recomputed: f64,
    },
    #[error("posterior summary needs at least {needed} samples, got {got}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("samples disagree in cube, scale, or link")]
    InconsistentSamples,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Log-likelihood of an intensity. The zero implementation turns the chain
/// into a pure prior sampler, which is how reversibility is tested.
pub trait LogLikelihood {
    fn eval(&self, rho: &IntensityFunction) -> f64;
}

pub struct ZeroLikelihood;

impl LogLikelihood for ZeroLikelihood {
    fn eval(&self, _rho: &IntensityFunction) -> f64 {
        0.0
    }
}

/// The model log-likelihood with all interpolation stencils precomputed:
/// one per observed point, one per window cell. Evaluation is then a pair of
/// weighted sums over the latent, which is what makes long chains cheap.
pub struct CoxLikelihood {
    cube_dim: usize,
    cube_nodes: usize,
    cell_volume: f64,
    point_stencils: Vec<InterpStencil>,
    cell_stencils: Vec<InterpStencil>,
}

impl CoxLikelihood {
    pub fn new(
        pattern: &PointPattern,
        covariates: &CovariateField,
        cube: &CubeGrid,
    ) -> Result<Self, InferenceError> {
        let grid = pattern.window();
        if covariates.dim() != grid.dim()
            || covariates.cells_per_axis() != grid.cells_per_axis()
            || covariates.covariate_dim() != cube.dim()
        {
            return Err(InferenceError::Model(ModelError::ShapeMismatch {
                field_dim: covariates.dim(),
                field_cells: covariates.cells_per_axis(),
                grid_dim: grid.dim(),
                grid_cells: grid.cells_per_axis(),
            }));
        }
        let d = cube.dim();
        let mut z = vec![0.0; d];
        let mut point_stencils = Vec::with_capacity(pattern.count());
        for point in pattern.iter() {
            let cell = grid.cell_of(point)?;
            covariates.at_cell(cell, &mut z);
            point_stencils.push(cube.stencil(&z).0);
        }
        let mut cell_stencils = Vec::with_capacity(covariates.num_cells());
        for cell in 0..covariates.num_cells() {
            covariates.at_cell(cell, &mut z);
            cell_stencils.push(cube.stencil(&z).0);
        }
        Ok(CoxLikelihood {
            cube_dim: d,
            cube_nodes: cube.num_nodes(),
            cell_volume: grid.cell_volume(),
            point_stencils,
            cell_stencils,
        })
    }

    pub fn num_points(&self) -> usize {
        self.point_stencils.len()
    }
}

impl LogLikelihood for CoxLikelihood {
    fn eval(&self, rho: &IntensityFunction) -> f64 {
        assert_eq!(
            rho.cube().dim(),
            self.cube_dim,
            "likelihood built for another cube"
        );
        assert_eq!(
            rho.cube().num_nodes(),
            self.cube_nodes,
            "likelihood built for another cube"
        );
        let latent = rho.latent();
        let scale = rho.scale();
        let link = rho.link();
        let mut data = 0.0;
        for st in &self.point_stencils {
            data += link.log_apply(scale * st.apply(latent));
        }
        let mut integral = 0.0;
        for st in &self.cell_stencils {
            integral += link.apply(scale * st.apply(latent));
        }
        data - integral * self.cell_volume
    }
}

/// Chain tuning. `adapt_window = 0` disables step adaptation entirely.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub target_accept: f64,
    pub adapt_window: usize,
    pub initial_step: f64,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.iterations <= self.burn_in {
            return Err(InferenceError::InvalidConfig(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thinning == 0 {
            return Err(InferenceError::InvalidConfig(
                "thinning must be at least 1".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(InferenceError::InvalidConfig(format!(
                "target acceptance must lie in (0,1), got {}",
                self.target_accept
            )));
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return Err(InferenceError::InvalidConfig(format!(
                "step size must lie in (0,1], got {}",
                self.initial_step
            )));
        }
        Ok(())
    }
}

/// Current chain position with its cached likelihood.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub latent: Vec<f64>,
    pub cached_loglik: f64,
    pub step: f64,
    pub accepted: u64,
    pub iteration: u64,
}

/// One pCN move: propose sqrt(1-s^2) w + s xi with xi a fresh base draw,
/// accept with probability min(1, exp(l' - l)). Returns the accept flag.
/// Non-finite proposal likelihoods reject (NaN is logged, -inf is ordinary).
pub fn pcn_step<L: LogLikelihood, R: Rng + ?Sized>(
    state: &mut ChainState,
    likelihood: &L,
    base: &BasePrior,
    scale: f64,
    rng: &mut R,
) -> bool {
    let xi = base.sample_latent(rng);
    let s = state.step;
    let keep = (1.0 - s * s).sqrt();
    let proposal: Vec<f64> = state
        .latent
        .iter()
        .zip(&xi)
        .map(|(w, x)| keep * w + s * x)
        .collect();
    let candidate =
        IntensityFunction::new(base.cube().clone(), proposal, scale, base.spec().link())
            .expect("pCN proposal keeps latent finite");
    let proposed_loglik = likelihood.eval(&candidate);
    let u: f64 = rng.gen();
    state.iteration += 1;
    if proposed_loglik.is_nan() {
        log::warn!(
            "proposal log-likelihood is NaN at iteration {}; rejecting",
            state.iteration
        );
        return false;
    }
    let accept = u.ln() < proposed_loglik - state.cached_loglik;
    if accept {
        state.latent = candidate.latent().to_vec();
        state.cached_loglik = proposed_loglik;
        state.accepted += 1;
    }
    accept
}

/// Per-iteration trace record, persisted by the harness for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub log_likelihood: f64,
    pub accepted: bool,
    pub step: f64,
}

/// Completed chain: retained samples plus diagnostics.
pub struct ChainRun {
    pub samples: Vec<IntensityFunction>,
    pub trace: Vec<TraceRow>,
    pub acceptance_rate: f64,
    pub final_step: f64,
}

/// Runs a full chain. Deterministic in `seed`: iteration i draws from its own
/// derived stream, so replays are exact under any scheduling.
pub fn run_chain<L: LogLikelihood>(
    config: &ChainConfig,
    likelihood: &L,
    base: &BasePrior,
    n: f64,
    seed: u64,
) -> Result<ChainRun, InferenceError> {
    config.validate()?;
    let scale = crate::prior::rescale_factor(n, base.spec().alpha(), base.spec().covariate_dim());
    let link = base.spec().link();
    let mut init_rng = stream_rng(seed, "pcn-init", &[]);
    let latent = base.sample_latent(&mut init_rng);
    let initial = IntensityFunction::new(base.cube().clone(), latent, scale, link)?;
    let mut state = ChainState {
        cached_loglik: likelihood.eval(&initial),
        latent: initial.latent().to_vec(),
        step: config.initial_step,
        accepted: 0,
        iteration: 0,
    };
    let retained = (config.iterations - config.burn_in).div_ceil(config.thinning);
    let mut samples = Vec::with_capacity(retained);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut window_accepts = 0usize;
    let mut window_count = 0usize;
    let mut post_accepts = 0u64;
    let mut post_total = 0u64;
    for i in 0..config.iterations as u64 {
        let mut rng = stream_rng(seed, "pcn-iter", &[i]);
        let accepted = pcn_step(&mut state, likelihood, base, scale, &mut rng);
        let in_burn_in = (i as usize) < config.burn_in;
        if in_burn_in && config.adapt_window > 0 {
            window_accepts += accepted as usize;
            window_count += 1;
            if window_count == config.adapt_window {
                let rate = window_accepts as f64 / window_count as f64;
                if rate > config.target_accept {
                    state.step = (state.step * ADAPT_FACTOR).min(1.0);
                } else {
                    state.step = (state.step / ADAPT_FACTOR).max(1e-6);
                }
                window_accepts = 0;
                window_count = 0;
            }
        }
        if !in_burn_in {
            post_total += 1;
            post_accepts += accepted as u64;
            let j = i as usize - config.burn_in;
            if j.is_multiple_of(config.thinning) {
                samples.push(IntensityFunction::new(
                    base.cube().clone(),
                    state.latent.clone(),
                    scale,
                    link,
                )?);
            }
        }
        trace.push(TraceRow {
            iteration: state.iteration,
            log_likelihood: state.cached_loglik,
            accepted,
            step: state.step,
        });
        if state.iteration.is_multiple_of(SPOT_CHECK_INTERVAL) {
            let current =
                IntensityFunction::new(base.cube().clone(), state.latent.clone(), scale, link)?;
            let recomputed = likelihood.eval(&current);
            let drifted = if recomputed.is_finite() || state.cached_loglik.is_finite() {
                (recomputed - state.cached_loglik).abs() > CACHE_TOLERANCE
            } else {
                false
            };
            if drifted {
                return Err(InferenceError::CacheDrift {
                    iteration: state.iteration,
                    cached: state.cached_loglik,
                    recomputed,
                });
            }
        }
    }
    let acceptance_rate = if post_total > 0 {
        post_accepts as f64 / post_total as f64
    } else {
        0.0
    };
    if acceptance_rate < MIN_ACCEPTANCE {
        return Err(InferenceError::LowAcceptance {
            rate: acceptance_rate,
        });
    }
    debug_assert_eq!(samples.len(), retained);
    Ok(ChainRun {
        samples,
        trace,
        acceptance_rate,
        final_step: state.step,
    })
}

/// A plain function on cube nodes, evaluated by multilinear interpolation.
/// Posterior means live here: averaging linked samples node-wise does not
/// produce another linked latent, just a grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeGridFunction {
    cube: CubeGrid,
    values: Vec<f64>,
}

impl CubeGridFunction {
    pub fn new(cube: CubeGrid, values: Vec<f64>) -> Result<Self, InferenceError> {
        if values.len() != cube.num_nodes() {
            return Err(InferenceError::InvalidConfig(format!(
                "grid function has {} values for {} nodes",
                values.len(),
                cube.num_nodes()
            )));
        }
        Ok(CubeGridFunction { cube, values })
    }

    pub fn cube(&self) -> &CubeGrid {
        &self.cube
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Intensity for CubeGridFunction {
    fn dim_in(&self) -> usize {
        self.cube.dim()
    }

    fn eval(&self, z: &[f64]) -> f64 {
        self.cube.interp(&self.values, z)
    }
}

/// Node-wise posterior summaries plus the L1 geometry of the sample cloud.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub mean_latent: Vec<f64>,
    pub mean_intensity: CubeGridFunction,
    pub quantile_05: Vec<f64>,
    pub quantile_95: Vec<f64>,
    pub l1_error_of_mean: Option<f64>,
    pub credible_l1_radius: f64,
}

const MIN_SUMMARY_SAMPLES: usize = 50;

/// Summarizes a sample list: node-wise mean latent and mean intensity,
/// pointwise 5%/95% intensity quantiles, the L1 error of the mean against an
/// optional truth, and the smallest radius holding 90% of the samples around
/// the mean.
pub fn posterior_summary<T: Intensity>(
    samples: &[IntensityFunction],
    truth: Option<&T>,
    quadrature_cells: usize,
) -> Result<PosteriorSummary, InferenceError> {
    if samples.len() < MIN_SUMMARY_SAMPLES {
        return Err(InferenceError::TooFewSamples {
            got: samples.len(),
            needed: MIN_SUMMARY_SAMPLES,
        });
    }
    let first = &samples[0];
    let cube = first.cube().clone();
    let nodes = cube.num_nodes();
    let consistent = samples
        .iter()
        .all(|s| s.cube() == &cube && s.scale() == first.scale() && s.link() == first.link());
    if !consistent {
        return Err(InferenceError::InconsistentSamples);
    }
    let count = samples.len() as f64;
    let mut node_intensities = vec![Vec::with_capacity(samples.len()); nodes];
    for sample in samples {
        let scale = sample.scale();
        let link = sample.link();
        for (node, &w) in sample.latent().iter().enumerate() {
            node_intensities[node].push(link.apply(scale * w));
        }
    }
    // Means are accumulated as deviations from the first sample, so a list of
    // identical samples averages to the sample exactly.
    let mut mean_latent = first.latent().to_vec();
    for sample in samples.iter().skip(1) {
        for (node, &w) in sample.latent().iter().enumerate() {
            mean_latent[node] += (w - first.latent()[node]) / count;
        }
    }
    let mut mean_nodes = vec![0.0; nodes];
    let mut quantile_05 = vec![0.0; nodes];
    let mut quantile_95 = vec![0.0; nodes];
    for (node, values) in node_intensities.iter_mut().enumerate() {
        let anchor = values[0];
        mean_nodes[node] = anchor + values.iter().map(|v| v - anchor).sum::<f64>() / count;
        values.sort_by(|a, b| a.partial_cmp(b).expect("intensities are finite"));
        quantile_05[node] = quantile_sorted(values, 0.05);
        quantile_95[node] = quantile_sorted(values, 0.95);
        if !(quantile_05[node] <= mean_nodes[node] && mean_nodes[node] <= quantile_95[node]) {
            log::warn!("posterior mean at node {node} falls outside its 5-95% band; heavy skew");
        }
    }
    let mean_intensity = CubeGridFunction::new(cube, mean_nodes)?;
    let l1_error_of_mean = match truth {
        Some(t) => Some(l1_distance(&mean_intensity, t, quadrature_cells)?),
        None => None,
    };
    let mut distances: Vec<f64> = samples
        .iter()
        .map(|s| l1_distance(s, &mean_intensity, quadrature_cells))
        .collect::<Result<_, _>>()?;
    distances.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let hold = ((0.9 * samples.len() as f64).ceil() as usize).clamp(1, samples.len());
    let credible_l1_radius = distances[hold - 1];
    Ok(PosteriorSummary {
        mean_latent,
        mean_intensity,
        quantile_05,
        quantile_95,
        l1_error_of_mean,
        credible_l1_radius,
    })
}

/// Linear-interpolation quantile of an already sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let last = sorted.len() - 1;
    let h = p * last as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo >= last {
        sorted[last]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}
