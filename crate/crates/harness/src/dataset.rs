//! Dataset generation: latent fields, covariates, and one point pattern per
//! window volume, persisted with a manifest.

use crate::config::ExperimentConfig;
use crate::fieldio::{read_covariates, read_pattern, write_covariates, write_pattern};
use crate::manifest::RunManifest;
use crate::seeding::SeedLedger;
use crate::HarnessError;
use coxlab_core::covariates::{build_covariates, CovariateField};
use coxlab_core::coxmodel::{intensity_field, sample_points, PointPattern};
use coxlab_core::grid::SpatialGrid;
use coxlab_core::intensity::Intensity;
use coxlab_core::randfield::FieldSampler;
use std::path::{Path, PathBuf};

/// One simulated observation: window, covariates, and the point pattern
/// drawn from the configured ground truth.
#[derive(Debug)]
pub struct Dataset {
    pub n: f64,
    pub replicate: u64,
    pub grid: SpatialGrid,
    pub covariates: CovariateField,
    pub pattern: PointPattern,
    /// Provenance ids of the latent field streams, one per channel.
    pub latent_seeds: Vec<u64>,
    /// Provenance id of the point pattern stream.
    pub pattern_seed: u64,
}

/// Simulates one dataset in memory. All randomness comes from streams keyed
/// by the window volume bits, the replicate index, and (for fields) the
/// covariate channel, so any (n, replicate) task is reproducible in
/// isolation.
pub fn simulate_dataset(
    config: &ExperimentConfig,
    n: f64,
    replicate: u64,
    ledger: &SeedLedger,
) -> Result<Dataset, HarnessError> {
    let grid = config.window_grid(n)?;
    let model = config.covariance_model()?;
    let sampler = FieldSampler::new(&grid, &model)?;

    let mut fields = Vec::with_capacity(config.covariate_dim);
    let mut latent_seeds = Vec::with_capacity(config.covariate_dim);
    for channel in 0..config.covariate_dim as u64 {
        let parts = [n.to_bits(), replicate, channel];
        let mut rng = ledger.rng("latent-field", &parts);
        latent_seeds.push(coxlab_core::streams::stream_seed(
            ledger.root(),
            "latent-field",
            &parts,
        ));
        fields.push(sampler.sample(&mut rng));
    }
    let covariates = build_covariates(&fields)?;

    let truth = config.ground_truth_spec()?;
    let lambda = intensity_field(&truth, &covariates)?;
    let parts = [n.to_bits(), replicate];
    let mut rng = ledger.rng("point-pattern", &parts);
    let pattern_seed = coxlab_core::streams::stream_seed(ledger.root(), "point-pattern", &parts);
    let pattern = sample_points(&lambda, &grid, &mut rng)?;
    // Guard against overwhelming artifacts from a miscalibrated truth; the
    // expected count equals the integral of the intensity.
    let expected = coxlab_core::coxmodel::total_mass(&lambda, &grid);
    log::info!(
        "simulated n={n} replicate={replicate}: {} points (expected {expected:.1})",
        pattern.count()
    );

    Ok(Dataset {
        n,
        replicate,
        grid,
        covariates,
        pattern,
        latent_seeds,
        pattern_seed,
    })
}

/// Writes `covariates.bin`, `pattern.csv`, and `manifest.toml` into `dir`.
pub fn write_dataset(
    dir: &Path,
    config: &ExperimentConfig,
    dataset: &Dataset,
    ledger: &SeedLedger,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let covariates_path = dir.join("covariates.bin");
    let pattern_path = dir.join("pattern.csv");
    write_covariates(
        &covariates_path,
        &dataset.covariates,
        &dataset.grid,
        &dataset.latent_seeds,
    )?;
    write_pattern(&pattern_path, &dataset.pattern, dataset.pattern_seed)?;

    let mut manifest = RunManifest::new("simulate", ledger.root(), config.to_toml_string());
    manifest.n = Some(dataset.n);
    manifest.volume = Some(dataset.grid.volume());
    manifest.replicate = Some(dataset.replicate);
    manifest.record_artifact(&covariates_path)?;
    manifest.record_artifact(&pattern_path)?;
    manifest.streams = ledger.records();
    manifest.write(dir)?;
    Ok(())
}

/// Reads a dataset directory written by [`write_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset, HarnessError> {
    let stored = read_covariates(&dir.join("covariates.bin"))?;
    let (pattern, pattern_seed) = read_pattern(&dir.join("pattern.csv"))?;
    if pattern.window().dim() != stored.grid.dim()
        || pattern.window().cells_per_axis() != stored.grid.cells_per_axis()
        || pattern.window().volume() != stored.grid.volume()
    {
        return Err(HarnessError::Runtime(
            "pattern window disagrees with covariate grid".into(),
        ));
    }
    Ok(Dataset {
        n: stored.grid.volume(),
        replicate: 0,
        grid: stored.grid,
        covariates: stored.field,
        pattern,
        latent_seeds: stored.latent_seeds,
        pattern_seed,
    })
}

/// CLI entry: simulates one dataset per configured window volume, each in
/// its own subdirectory `n<volume>/` with a separate seed ledger, then
/// returns the dataset directories.
pub fn run_simulate(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut dirs = Vec::new();
    for &n in &config.n_grid {
        let ledger = SeedLedger::new(config.master_seed);
        let dataset = simulate_dataset(config, n, 0, &ledger)?;
        let dir = out_dir.join(format!("n{n}"));
        write_dataset(&dir, config, &dataset, &ledger)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// The intensity actually used to generate a dataset, evaluated cell-wise.
pub fn true_intensity(
    config: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<Vec<f64>, HarnessError> {
    let truth = config.ground_truth_spec()?;
    Ok(intensity_field(&truth, &dataset.covariates)?)
}

/// Convenience wrapper used by diagnostics: the ground truth as a function
/// on covariate space.
pub fn truth_function(config: &ExperimentConfig) -> Result<impl Intensity, HarnessError> {
    Ok(config.ground_truth_spec()?)
}
