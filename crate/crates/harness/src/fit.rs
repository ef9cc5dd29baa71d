//! Posterior fitting: run the chain on a dataset, summarize, persist.

use crate::config::ExperimentConfig;
use crate::dataset::{load_dataset, Dataset};
use crate::manifest::RunManifest;
use crate::seeding::SeedLedger;
use crate::HarnessError;
use coxlab_core::coxmodel::GroundTruthSpec;
use coxlab_core::inference::{
    posterior_summary, run_chain, ChainRun, CoxLikelihood, PosteriorSummary,
};
use coxlab_core::prior::BasePrior;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Result of one fit: the summary plus chain diagnostics.
pub struct FitOutput {
    pub summary: PosteriorSummary,
    pub acceptance_rate: f64,
    pub final_step: f64,
    pub sample_count: usize,
}

/// Fits the posterior for one dataset in memory. `truth` controls whether
/// the summary reports the L1 error of the posterior mean; pass `None` when
/// the generating intensity is unknown.
pub fn fit_dataset(
    config: &ExperimentConfig,
    dataset: &Dataset,
    truth: Option<&GroundTruthSpec>,
    ledger: &SeedLedger,
) -> Result<(FitOutput, ChainRun), HarnessError> {
    let prior_spec = config.prior_spec()?;
    let base = BasePrior::new(prior_spec)?;
    let likelihood = CoxLikelihood::new(&dataset.pattern, &dataset.covariates, base.cube())?;
    let chain_seed = ledger.seed("pcn-chain", &[dataset.n.to_bits(), dataset.replicate]);
    let run = run_chain(
        &config.chain_config(),
        &likelihood,
        &base,
        dataset.n,
        chain_seed,
    )?;
    let summary = posterior_summary(&run.samples, truth, config.quadrature_cells_per_axis)?;
    let output = FitOutput {
        summary,
        acceptance_rate: run.acceptance_rate,
        final_step: run.final_step,
        sample_count: run.samples.len(),
    };
    Ok((output, run))
}

/// CLI entry: loads a dataset directory, fits it, and writes `summary.csv`,
/// `trace.csv`, and a manifest into `out_dir`.
pub fn run_fit(
    config: &ExperimentConfig,
    dataset_dir: &Path,
    out_dir: &Path,
) -> Result<FitOutput, HarnessError> {
    config.validate()?;
    let dataset = load_dataset(dataset_dir)?;
    let ledger = SeedLedger::new(config.master_seed);
    let truth = config.ground_truth_spec()?;
    let (output, run) = fit_dataset(config, &dataset, Some(&truth), &ledger)?;

    std::fs::create_dir_all(out_dir)?;
    let summary_path = out_dir.join("summary.csv");
    let trace_path = out_dir.join("trace.csv");
    write_summary(&summary_path, &dataset, &output)?;
    write_trace(&trace_path, &run)?;

    let mut manifest = RunManifest::new("fit", ledger.root(), config.to_toml_string());
    manifest.n = Some(dataset.n);
    manifest.volume = Some(dataset.grid.volume());
    manifest.record_artifact(&summary_path)?;
    manifest.record_artifact(&trace_path)?;
    manifest.streams = ledger.records();
    manifest.write(out_dir)?;
    Ok(output)
}

/// Node-wise posterior summary table with run-level scalars in the header.
pub fn write_summary(
    path: &Path,
    dataset: &Dataset,
    output: &FitOutput,
) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let summary = &output.summary;
    writeln!(w, "# format=fit-summary-v1")?;
    writeln!(w, "# n={}", dataset.n)?;
    writeln!(w, "# points={}", dataset.pattern.count())?;
    writeln!(w, "# sample_count={}", output.sample_count)?;
    writeln!(w, "# acceptance_rate={}", output.acceptance_rate)?;
    writeln!(w, "# final_step={}", output.final_step)?;
    writeln!(w, "# credible_l1_radius={}", summary.credible_l1_radius)?;
    if let Some(err) = summary.l1_error_of_mean {
        writeln!(w, "# l1_error_of_mean={err}")?;
    }
    writeln!(w, "node,mean_latent,mean_intensity,q05,q95")?;
    let values = summary.mean_intensity.values();
    for (node, latent) in summary.mean_latent.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            node, latent, values[node], summary.quantile_05[node], summary.quantile_95[node],
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, run: &ChainRun) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# format=fit-trace-v1")?;
    writeln!(w, "iteration,log_likelihood,accepted,step")?;
    for row in &run.trace {
        writeln!(
            w,
            "{},{},{},{}",
            row.iteration,
            row.log_likelihood,
            u8::from(row.accepted),
            row.step,
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed form of `summary.csv`, for lossless round-trip checks and
/// downstream tooling.
#[derive(Debug, PartialEq)]
pub struct StoredSummary {
    pub n: f64,
    pub points: usize,
    pub sample_count: usize,
    pub acceptance_rate: f64,
    pub final_step: f64,
    pub credible_l1_radius: f64,
    pub l1_error_of_mean: Option<f64>,
    pub mean_latent: Vec<f64>,
    pub mean_intensity: Vec<f64>,
    pub quantile_05: Vec<f64>,
    pub quantile_95: Vec<f64>,
}

pub fn read_summary(path: &Path) -> Result<StoredSummary, HarnessError> {
    let runtime = |msg: String| HarnessError::Runtime(msg);
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut header = std::collections::BTreeMap::new();
    let mut mean_latent = Vec::new();
    let mut mean_intensity = Vec::new();
    let mut quantile_05 = Vec::new();
    let mut quantile_95 = Vec::new();
    let mut saw_columns = false;
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some((key, value)) = rest.split_once('=') {
                header.insert(key.to_string(), value.to_string());
            }
            continue;
        }
        if !saw_columns {
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(runtime(format!("bad summary row {line:?}")));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| runtime(format!("bad summary value {s:?}")))
        };
        mean_latent.push(parse(fields[1])?);
        mean_intensity.push(parse(fields[2])?);
        quantile_05.push(parse(fields[3])?);
        quantile_95.push(parse(fields[4])?);
    }
    let scalar = |key: &str| -> Result<f64, HarnessError> {
        header
            .get(key)
            .ok_or_else(|| runtime(format!("summary header missing {key}")))?
            .parse()
            .map_err(|_| runtime(format!("bad summary header {key}")))
    };
    Ok(StoredSummary {
        n: scalar("n")?,
        points: scalar("points")? as usize,
        sample_count: scalar("sample_count")? as usize,
        acceptance_rate: scalar("acceptance_rate")?,
        final_step: scalar("final_step")?,
        credible_l1_radius: scalar("credible_l1_radius")?,
        l1_error_of_mean: match header.get("l1_error_of_mean") {
            Some(text) => Some(
                text.parse()
                    .map_err(|_| runtime("bad l1_error_of_mean".into()))?,
            ),
            None => None,
        },
        mean_latent,
        mean_intensity,
        quantile_05,
        quantile_95,
    })
}
