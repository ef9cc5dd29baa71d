//! Statistical validation suites.
//!
//! Each suite checks one pipeline stage against an independent oracle:
//! closed-form covariances, exact Poisson moments, a brute-force quadrature
//! posterior, known distance identities. Failing checks are entries in the
//! returned report, not errors; the caller decides how to surface them.
//! All randomness is derived from the master seed, so a passing report is
//! reproducible bit for bit.

use crate::seeding::SeedLedger;
use crate::HarnessError;
use coxlab_core::covariates::{build_covariates, phi, CovariateField};
use coxlab_core::coxmodel::{log_likelihood, sample_points, GroundTruthSpec, PointPattern};
use coxlab_core::grid::window_from_n;
use coxlab_core::inference::{
    run_chain, ChainConfig, CoxLikelihood, LogLikelihood, ZeroLikelihood,
};
use coxlab_core::intensity::ConstantIntensity;
use coxlab_core::matern::{matern_cov, CovarianceModel};
use coxlab_core::metrics::{delta_diagnostic, l1_distance};
use coxlab_core::prior::{rescale_factor, BasePrior, IntensityFunction, LinkFunction, PriorSpec};
use coxlab_core::randfield::{check_embedding, FieldSampler};
use serde::Serialize;

/// Kolmogorov-Smirnov critical coefficient at the 1% level; the finite-n
/// critical value is c / (sqrt(R) + 0.12 + 0.11 / sqrt(R)).
const KS_CRIT_COEFF_1PCT: f64 = 1.6276;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Fields,
    Covariates,
    Likelihood,
    Sampler,
    Metrics,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fields" => Ok(Suite::Fields),
            "covariates" => Ok(Suite::Covariates),
            "likelihood" => Ok(Suite::Likelihood),
            "sampler" => Ok(Suite::Sampler),
            "metrics" => Ok(Suite::Metrics),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite {other:?}; expected fields, covariates, likelihood, sampler, \
                 metrics, or all"
            )),
        }
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Suite::Fields => "fields",
            Suite::Covariates => "covariates",
            Suite::Likelihood => "likelihood",
            Suite::Sampler => "sampler",
            Suite::Metrics => "metrics",
            Suite::All => "all",
        };
        f.write_str(name)
    }
}

/// One oracle comparison. `statistic` is the observed quantity, `threshold`
/// the bound it was held to; the direction is check-specific and spelled out
/// in `detail`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub suite: String,
    pub master_seed: u64,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per check, the CLI's terminal output.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for check in &self.checks {
            let status = if check.passed { "pass" } else { "FAIL" };
            out.push_str(&format!(
                "[{status}] {}/{}: statistic {:.6e} vs threshold {:.6e} ({})\n",
                check.suite, check.name, check.statistic, check.threshold, check.detail
            ));
        }
        out
    }
}

/// Runs one suite (or all of them) against the given master seed. Check
/// streams are keyed by check name alone, so a check draws the same numbers
/// whether it runs alone or as part of `all`.
pub fn run_validate(suite: Suite, master_seed: u64) -> Result<ValidationReport, HarnessError> {
    let ledger = SeedLedger::new(master_seed);
    let mut checks = Vec::new();
    let run_fields = matches!(suite, Suite::Fields | Suite::All);
    let run_covariates = matches!(suite, Suite::Covariates | Suite::All);
    let run_likelihood = matches!(suite, Suite::Likelihood | Suite::All);
    let run_sampler = matches!(suite, Suite::Sampler | Suite::All);
    let run_metrics = matches!(suite, Suite::Metrics | Suite::All);

    if run_fields {
        checks.push(matern_lag_covariance(&ledger)?);
        checks.push(embedding_spectrum()?);
    }
    if run_covariates {
        checks.push(single_site_uniformity(&ledger)?);
        checks.push(channel_independence(&ledger)?);
    }
    if run_likelihood {
        checks.push(unit_intensity_identity(&ledger)?);
        let (mean, dispersion) = poisson_count_moments(&ledger)?;
        checks.push(mean);
        checks.push(dispersion);
    }
    if run_sampler {
        checks.push(toy_posterior_mean(&ledger)?);
        checks.push(prior_reversibility(&ledger)?);
    }
    if run_metrics {
        checks.push(distance_identities()?);
        checks.push(distance_gap_scaling(&ledger)?);
    }

    for check in &checks {
        let status = if check.passed { "pass" } else { "FAIL" };
        log::info!("validate {}/{}: {status}", check.suite, check.name);
    }
    Ok(ValidationReport {
        suite: suite.to_string(),
        master_seed,
        checks,
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    (mean, (var / count).sqrt())
}

/// Empirical covariance of a stationary unit-variance field at chosen lags,
/// compared to the Matern kernel within 3 standard errors.
fn matern_lag_covariance(ledger: &SeedLedger) -> Result<CheckResult, HarnessError> {
    const REPLICATES: usize = 10_000;
    let grid = window_from_n(32.0, 1, 64)?;
    let model = CovarianceModel::matern(0.5, 1.0)?;
    let sampler = FieldSampler::new(&grid, &model)?;
    let spacing = grid.spacing();
    let lags = [0usize, 1, 2, 4];

    let mut rng = ledger.rng("validate-matern-lags", &[]);
    let mut per_lag: Vec<Vec<f64>> = vec![Vec::with_capacity(REPLICATES); lags.len()];
    for _ in 0..REPLICATES {
        let field = sampler.sample(&mut rng);
        let values = &field.values;
        for (slot, &lag) in lags.iter().enumerate() {
            let pairs = values.len() - lag;
            let mut acc = 0.0;
            for i in 0..pairs {
                acc += values[i] * values[i + lag];
            }
            per_lag[slot].push(acc / pairs as f64);
        }
    }

    let mut max_z = 0.0f64;
    let mut detail = String::new();
    for (slot, &lag) in lags.iter().enumerate() {
        let distance = lag as f64 * spacing;
        let expected = matern_cov(distance, &model)?;
        let (mean, se) = mean_and_se(&per_lag[slot]);
        let z = (mean - expected).abs() / se;
        max_z = max_z.max(z);
        detail.push_str(&format!(
            "lag {distance}: {mean:.4} vs {expected:.4} (z {z:.2}); "
        ));
    }
    Ok(CheckResult {
        suite: "fields".into(),
        name: "matern_lag_covariance".into(),
        passed: max_z < 3.0,
        statistic: max_z,
        threshold: 3.0,
        detail: format!(
            "max |z| over {REPLICATES} replicates; {}",
            detail.trim_end()
        ),
    })
}

/// The circulant embedding must be nonnegative (up to the documented clip)
/// for the covariance models the studies use.
fn embedding_spectrum() -> Result<CheckResult, HarnessError> {
    let grid = window_from_n(64.0, 1, 128)?;
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for (nu, lengthscale) in [(0.5, 1.0), (1.5, 1.0), (2.5, 0.7)] {
        let model = CovarianceModel::matern(nu, lengthscale)?;
        let report = check_embedding(&grid, &model)?;
        let ratio = report.min_eigenvalue / report.max_eigenvalue;
        worst = worst.min(ratio);
        detail.push_str(&format!(
            "nu {nu}: pad {} min/max {:.2e}; ",
            report.pad_factor, ratio
        ));
    }
    Ok(CheckResult {
        suite: "fields".into(),
        name: "embedding_spectrum".into(),
        passed: worst >= -1e-10,
        statistic: worst,
        threshold: -1e-10,
        detail: detail.trim_end().to_string(),
    })
}

/// A covariate at a fixed site is exactly uniform on (0, 1): the
/// Kolmogorov-Smirnov statistic over independent replicates must stay below
/// the 1% critical value.
fn single_site_uniformity(ledger: &SeedLedger) -> Result<CheckResult, HarnessError> {
    const REPLICATES: usize = 10_000;
    let grid = window_from_n(16.0, 1, 32)?;
    let model = CovarianceModel::matern(0.5, 1.0)?;
    let sampler = FieldSampler::new(&grid, &model)?;
    let site = 15;

    let mut rng = ledger.rng("validate-single-site", &[]);
    let mut values = Vec::with_capacity(REPLICATES);
    for _ in 0..REPLICATES {
        let field = sampler.sample(&mut rng);
        values.push(phi(field.values[site]));
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite covariates"));
    let count = values.len() as f64;
    let mut ks = 0.0f64;
    for (i, &v) in values.iter().enumerate() {
        ks = ks.max(v - i as f64 / count);
        ks = ks.max((i + 1) as f64 / count - v);
    }
    let sqrt_r = count.sqrt();
    let critical = KS_CRIT_COEFF_1PCT / (sqrt_r + 0.12 + 0.11 / sqrt_r);
    Ok(CheckResult {
        suite: "covariates".into(),
        name: "single_site_uniformity".into(),
        passed: ks < critical,
        statistic: ks,
        threshold: critical,
        detail: format!("KS distance to U(0,1) over {REPLICATES} replicates, 1% level"),
    })
}

/// Distinct covariate channels come from independent fields; their sample
/// correlation at a shared site must vanish.
fn channel_independence(ledger: &SeedLedger) -> Result<CheckResult, HarnessError> {
    const REPLICATES: usize = 10_000;
    let grid = window_from_n(16.0, 1, 32)?;
    let model = CovarianceModel::matern(0.5, 1.0)?;
    let sampler = FieldSampler::new(&grid, &model)?;
    let site = 7;

    let mut rng = ledger.rng("validate-channel-independence", &[]);
    let mut first = Vec::with_capacity(REPLICATES);
    let mut second = Vec::with_capacity(REPLICATES);
    for _ in 0..REPLICATES {
        let fields = [sampler.sample(&mut rng), sampler.sample(&mut rng)];
        let covariates = build_covariates(&fields)?;
        first.push(covariates.value(site, 0));
        second.push(covariates.value(site, 1));
    }
    let (mean_a, _) = mean_and_se(&first);
    let (mean_b, _) = mean_and_se(&second);
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..REPLICATES {
        let da = first[i] - mean_a;
        let db = second[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    let corr = cov / (var_a.sqrt() * var_b.sqrt());
    let threshold = 3.0 / (REPLICATES as f64).sqrt();
    Ok(CheckResult {
        suite: "covariates".into(),
        name: "channel_independence".into(),
        passed: corr.abs() < threshold,
        statistic: corr.abs(),
        threshold,
        detail: format!("|corr| between two channels at one site, {REPLICATES} replicates"),
    })
}

/// With rho identically one the log likelihood of any pattern on a volume-n
/// window is exactly -n; only quadrature rounding may intervene.
fn unit_intensity_identity(ledger: &SeedLedger) -> Result<CheckResult, HarnessError> {
    let model = CovarianceModel::matern(0.5, 1.0)?;
    let mut rng = ledger.rng("validate-unit-intensity", &[]);
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for n in [64.0, 256.0, 1024.0] {
        let grid = window_from_n(n, 1, (2.0 * n) as usize)?;
        let sampler = FieldSampler::new(&grid, &model)?;
        let field = sampler.sample(&mut rng);
        let covariates = build_covariates(std::slice::from_ref(&field))?;
        let rho = ConstantIntensity::new(1, 1.0);
        let lambda = vec![1.0; grid.num_cells()];
        let pattern = sample_points(&lambda, &grid, &mut rng)?;
        let loglik = log_likelihood(&rho, &pattern, &covariates)?;
        let rel = ((loglik + n) / n).abs();
        worst = worst.max(rel);
        detail.push_str(&format!("n {n}: rel {rel:.2e}; "));
    }
    Ok(CheckResult {
        suite: "likelihood".into(),
        name: "unit_intensity_identity".into(),
        passed: worst < 1e-9,
        statistic: worst,
        threshold: 1e-9,
        detail: detail.trim_end().to_string(),
    })
}

/// Unit intensity on a volume-100 window: counts are Poisson(100), so the
/// sample mean must sit within 3 standard errors and the dispersion
/// (variance over mean) within 5%.
fn poisson_count_moments(ledger: &SeedLedger) -> Result<(CheckResult, CheckResult), HarnessError> {
    const REPLICATES: usize = 10_000;
    let grid = window_from_n(100.0, 1, 200)?;
    let lambda = vec![1.0; grid.num_cells()];
    let mut rng = ledger.rng("validate-poisson-counts", &[]);
    let mut counts = Vec::with_capacity(REPLICATES);
    for _ in 0..REPLICATES {
        counts.push(sample_points(&lambda, &grid, &mut rng)?.count() as f64);
    }
    let (mean, se) = mean_and_se(&counts);
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    let dispersion = var / mean;

    let mean_z = (mean - 100.0).abs() / se;
    let mean_check = CheckResult {
        suite: "likelihood".into(),
        name: "poisson_mean".into(),
        passed: mean_z < 3.0,
        statistic: mean_z,
        threshold: 3.0,
        detail: format!("mean count {mean:.3} vs 100 over {REPLICATES} patterns"),
    };
    let dispersion_check = CheckResult {
        suite: "likelihood".into(),
        name: "poisson_dispersion".into(),
        passed: (dispersion - 1.0).abs() < 0.05,
        statistic: (dispersion - 1.0).abs(),
        threshold: 0.05,
        detail: format!("variance/mean {dispersion:.4}, must lie within 0.05 of 1"),
    };
    Ok((mean_check, dispersion_check))
}

/// The toy problem for the sampler oracle: three prior nodes, three window
/// cells with pinned covariates, four observed points.
struct ToyProblem {
    base: BasePrior,
    likelihood: CoxLikelihood,
    scale: f64,
    n: f64,
}

fn toy_problem() -> Result<ToyProblem, HarnessError> {
    let spec = PriorSpec::new(1.0, 1, 0.6, LinkFunction::Exponential, 2)?;
    let base = BasePrior::new(spec)?;
    let grid = window_from_n(3.0, 1, 3)?;
    let covariates = CovariateField::from_raw(1, 1, 3, vec![0.2, 0.5, 0.8], 0)?;
    let pattern = PointPattern::new(grid, vec![-1.2, -0.7, 0.3, 1.1])?;
    let likelihood = CoxLikelihood::new(&pattern, &covariates, base.cube())?;
    let scale = rescale_factor(3.0, 1.0, 1);
    Ok(ToyProblem {
        base,
        likelihood,
        scale,
        n: 3.0,
    })
}

/// Batch-means standard error of the mean of a correlated series.
fn batch_means_se(series: &[f64], batches: usize) -> f64 {
    let batch_len = series.len() / batches;
    let used = batch_len * batches;
    let mean = series[..used].iter().sum::<f64>() / used as f64;
    let mut acc = 0.0;
    for b in 0..batches {
        let chunk = &series[b * batch_len..(b + 1) * batch_len];
        let batch_mean = chunk.iter().sum::<f64>() / batch_len as f64;
        acc += (batch_mean - mean).powi(2);
    }
    (acc / (batches as f64 * (batches - 1) as f64)).sqrt()
}

/// Posterior mean on the toy problem against brute-force quadrature over the
/// three latent nodes, within 3 Monte Carlo standard errors per node.
fn toy_posterior_mean(ledger: &SeedLedger) -> Result<CheckResult, HarnessError> {
    let toy = toy_problem()?;
    let cube = toy.base.cube().clone();
    let link = toy.base.spec().link();

    // Prior precision from the node covariance.
    let model = CovarianceModel::matern(0.5, 0.6)?;
    let c01 = matern_cov(0.5, &model)?;
    let c02 = matern_cov(1.0, &model)?;
    let cov = nalgebra::Matrix3::new(1.0, c01, c02, c01, 1.0, c01, c02, c01, 1.0);
    let precision = cov.try_inverse().expect("toy covariance invertible");

    // Midpoint lattice over [-6, 6]^3: the prior is unit-variance, so the
    // truncation error is far below the Monte Carlo tolerance.
    const POINTS: usize = 40;
    let step = 12.0 / POINTS as f64;
    let coord = |index: usize| -6.0 + (index as f64 + 0.5) * step;
    let mut log_weights = Vec::with_capacity(POINTS * POINTS * POINTS);
    let mut states = Vec::with_capacity(POINTS * POINTS * POINTS);
    for i in 0..POINTS {
        for j in 0..POINTS {
            for k in 0..POINTS {
                let w = [coord(i), coord(j), coord(k)];
                let rho = IntensityFunction::new(cube.clone(), w.to_vec(), toy.scale, link)?;
                let loglik = toy.likelihood.eval(&rho);
                let v = nalgebra::Vector3::new(w[0], w[1], w[2]);
                let log_prior = -0.5 * (v.transpose() * precision * v)[(0, 0)];
                log_weights.push(loglik + log_prior);
                states.push(w);
            }
        }
    }
    let max_log = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut mass = 0.0;
    let mut mean = [0.0f64; 3];
    for (log_w, w) in log_weights.iter().zip(&states) {
        let weight = (log_w - max_log).exp();
        mass += weight;
        for node in 0..3 {
            mean[node] += weight * w[node];
        }
    }
    for m in mean.iter_mut() {
        *m /= mass;
    }

    let config = ChainConfig {
        iterations: 200_000,
        burn_in: 20_000,
        thinning: 10,
        target_accept: 0.3,
        adapt_window: 200,
        initial_step: 0.5,
    };
    let seed = ledger.seed("validate-toy-posterior", &[]);
    let run = run_chain(&config, &toy.likelihood, &toy.base, toy.n, seed)?;

    let mut max_z = 0.0f64;
    let mut detail = String::new();
    for (node, oracle_mean) in mean.iter().enumerate() {
        let series: Vec<f64> = run.samples.iter().map(|s| s.latent()[node]).collect();
        let chain_mean = series.iter().sum::<f64>() / series.len() as f64;
        let se = batch_means_se(&series, 45);
        let z = (chain_mean - oracle_mean).abs() / se;
        max_z = max_z.max(z);
        detail.push_str(&format!(
            "node {node}: chain {chain_mean:.4} vs oracle {oracle_mean:.4} (z {z:.2}); "
        ));
    }
    Ok(CheckResult {
        suite: "sampler".into(),
        name: "toy_posterior_mean".into(),
        passed: max_z < 3.0,
        statistic: max_z,
        threshold: 3.0,
        detail: format!(
            "40^3 quadrature oracle, acceptance {:.2}; {}",
            run.acceptance_rate,
            detail.trim_end()
        ),
    })
}

/// With a flat likelihood the chain must leave the prior invariant: each
/// node's sample variance stays within 3 autocorrelation-adjusted standard
/// errors of one.
fn prior_reversibility(ledger: &SeedLedger) -> Result<CheckResult, HarnessError> {
    let toy = toy_problem()?;
    let step = 0.5f64;
    let config = ChainConfig {
        iterations: 100_000,
        burn_in: 0,
        thinning: 1,
        target_accept: 0.3,
        adapt_window: 0,
        initial_step: step,
    };
    let seed = ledger.seed("validate-prior-reversibility", &[]);
    let run = run_chain(&config, &ZeroLikelihood, &toy.base, toy.n, seed)?;

    // Every proposal is accepted, so node values follow an AR(1) chain with
    // lag-one correlation sqrt(1 - step^2); the variance of the sample
    // variance follows from that.
    let keep = (1.0 - step * step).sqrt();
    let iterations = run.samples.len() as f64;
    let se_var = (2.0 * (1.0 + keep * keep) / (1.0 - keep * keep) / iterations).sqrt();

    let mut max_z = 0.0f64;
    let mut detail = String::new();
    for node in 0..3 {
        let series: Vec<f64> = run.samples.iter().map(|s| s.latent()[node]).collect();
        let mean = series.iter().sum::<f64>() / iterations;
        let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (iterations - 1.0);
        let z = (var - 1.0).abs() / se_var;
        max_z = max_z.max(z);
        detail.push_str(&format!("node {node}: var {var:.4} (z {z:.2}); "));
    }
    Ok(CheckResult {
        suite: "sampler".into(),
        name: "prior_reversibility".into(),
        passed: max_z < 3.0 && run.acceptance_rate == 1.0,
        statistic: max_z,
        threshold: 3.0,
        detail: format!(
            "zero likelihood, acceptance {}; {}",
            run.acceptance_rate,
            detail.trim_end()
        ),
    })
}

/// Deterministic identities of the L1 distance on covariate space.
fn distance_identities() -> Result<CheckResult, HarnessError> {
    let link = LinkFunction::Exponential;
    let a = GroundTruthSpec::from_name("sine", 1, 1.0, link)?;
    let b = GroundTruthSpec::from_name("flat", 1, 1.0, link)?;
    let c = GroundTruthSpec::from_name("fourier", 1, 1.0, link)?;
    let cells = 512;

    let self_distance = l1_distance(&a, &a, cells)?;
    let ab = l1_distance(&a, &b, cells)?;
    let ba = l1_distance(&b, &a, cells)?;
    let ac = l1_distance(&a, &c, cells)?;
    let bc = l1_distance(&b, &c, cells)?;
    let violations = [self_distance, (ab - ba).abs(), (ac - (ab + bc)).max(0.0)];
    let worst = violations.iter().cloned().fold(0.0f64, f64::max);
    Ok(CheckResult {
        suite: "metrics".into(),
        name: "distance_identities".into(),
        passed: worst < 1e-9,
        statistic: worst,
        threshold: 1e-9,
        detail: format!(
            "identity {:.1e}, symmetry {:.1e}, triangle slack {:.1e}",
            violations[0], violations[1], violations[2]
        ),
    })
}

/// The gap between the covariate-space L1 distance and its empirical window
/// counterpart is a spatial average over roughly n independent patches, so
/// its RMS over replicates must shrink by about 2 per fourfold volume
/// increase. The acceptance window [1.5, 3.0] brackets that.
fn distance_gap_scaling(ledger: &SeedLedger) -> Result<CheckResult, HarnessError> {
    const REPLICATES: usize = 50;
    let link = LinkFunction::Exponential;
    let a = GroundTruthSpec::from_name("sine", 1, 1.0, link)?;
    let b = GroundTruthSpec::from_name("flat", 1, 1.0, link)?;
    let model = CovarianceModel::matern(0.5, 1.0)?;
    let volumes = [256.0, 1024.0, 4096.0];

    let mut rng = ledger.rng("validate-distance-gap", &[]);
    let mut rms = Vec::with_capacity(volumes.len());
    for &n in &volumes {
        let grid = window_from_n(n, 1, 8 * n as usize)?;
        let sampler = FieldSampler::new(&grid, &model)?;
        let mut acc = 0.0;
        for _ in 0..REPLICATES {
            let field = sampler.sample(&mut rng);
            let covariates = build_covariates(std::slice::from_ref(&field))?;
            let delta = delta_diagnostic(&a, &b, &covariates, &grid, 512)?;
            acc += delta * delta;
        }
        rms.push((acc / REPLICATES as f64).sqrt());
    }
    let ratios = [rms[0] / rms[1], rms[1] / rms[2]];
    let passed = ratios.iter().all(|r| (1.5..=3.0).contains(r));
    Ok(CheckResult {
        suite: "metrics".into(),
        name: "distance_gap_scaling".into(),
        passed,
        statistic: ratios[0].min(ratios[1]),
        threshold: 1.5,
        detail: format!(
            "RMS gap {:.2e}/{:.2e}/{:.2e} at n 256/1024/4096; ratios {:.2}, {:.2} \
             must lie in [1.5, 3.0]",
            rms[0], rms[1], rms[2], ratios[0], ratios[1]
        ),
    })
}
