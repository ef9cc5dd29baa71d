//! The rate study: posterior contraction measured across window volumes.
//!
//! For every (n, replicate) pair the study simulates a dataset, fits the
//! posterior, and records the L1 error of the posterior mean. Tasks run on a
//! worker pool but derive all randomness from (master_seed, tag, n,
//! replicate), so the artifacts are identical for any worker count. Each
//! task persists its result row immediately; `--resume` reuses rows that are
//! already on disk instead of recomputing them.

use crate::config::ExperimentConfig;
use crate::dataset::simulate_dataset;
use crate::fit::fit_dataset;
use crate::manifest::RunManifest;
use crate::plot::render_rate_plot;
use crate::seeding::SeedLedger;
use crate::HarnessError;
use coxlab_core::metrics::{rate_regression, RateReport};
use rayon::prelude::*;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Fraction of replicates per window volume that must succeed.
const MIN_SUCCESS_FRACTION: f64 = 0.8;

/// Outcome of one (n, replicate) task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRow {
    pub n: f64,
    pub replicate: u64,
    pub points: Option<u64>,
    pub l1_error: Option<f64>,
    pub credible_l1_radius: Option<f64>,
    pub acceptance_rate: Option<f64>,
    /// Error message for failed tasks, empty otherwise.
    pub detail: String,
}

impl TaskRow {
    pub fn succeeded(&self) -> bool {
        self.l1_error.is_some()
    }

    fn to_csv(&self) -> String {
        let opt_u = |v: &Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_f = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let status = if self.succeeded() { "ok" } else { "failed" };
        // Detail is free text from error values; keep the row single-line.
        let detail = self.detail.replace(['\n', ','], ";");
        format!(
            "{},{},{},{},{},{},{},,{}",
            self.n,
            self.replicate,
            status,
            opt_u(&self.points),
            opt_f(&self.l1_error),
            opt_f(&self.credible_l1_radius),
            opt_f(&self.acceptance_rate),
            detail
        )
    }

    fn from_csv(line: &str) -> Option<TaskRow> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return None;
        }
        let parse_u = |s: &str| -> Option<Option<u64>> {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        };
        let parse_f = |s: &str| -> Option<Option<f64>> {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        };
        Some(TaskRow {
            n: fields[0].parse().ok()?,
            replicate: fields[1].parse().ok()?,
            points: parse_u(fields[3])?,
            l1_error: parse_f(fields[4])?,
            credible_l1_radius: parse_f(fields[5])?,
            acceptance_rate: parse_f(fields[6])?,
            detail: fields[8].to_string(),
        })
    }
}

#[derive(Debug)]
pub struct RateStudyOutput {
    pub report: RateReport,
    pub rows: Vec<TaskRow>,
    pub report_path: PathBuf,
    pub plot_path: PathBuf,
}

fn run_task(config: &ExperimentConfig, n: f64, replicate: u64, ledger: &SeedLedger) -> TaskRow {
    let mut row = TaskRow {
        n,
        replicate,
        points: None,
        l1_error: None,
        credible_l1_radius: None,
        acceptance_rate: None,
        detail: String::new(),
    };
    let attempt = || -> Result<(u64, f64, f64, f64), HarnessError> {
        let dataset = simulate_dataset(config, n, replicate, ledger)?;
        let truth = config.ground_truth_spec()?;
        let (output, _) = fit_dataset(config, &dataset, Some(&truth), ledger)?;
        let error = output
            .summary
            .l1_error_of_mean
            .ok_or_else(|| HarnessError::Runtime("fit with truth reported no l1 error".into()))?;
        Ok((
            dataset.pattern.count() as u64,
            error,
            output.summary.credible_l1_radius,
            output.acceptance_rate,
        ))
    };
    match attempt() {
        Ok((points, error, radius, acceptance)) => {
            row.points = Some(points);
            row.l1_error = Some(error);
            row.credible_l1_radius = Some(radius);
            row.acceptance_rate = Some(acceptance);
        }
        Err(err) => {
            log::warn!("rate study task n={n} replicate={replicate} failed: {err}");
            row.detail = err.to_string();
        }
    }
    row
}

fn task_row_path(tasks_dir: &Path, n: f64, replicate: u64) -> PathBuf {
    tasks_dir.join(format!("n{n}_r{replicate}.csv"))
}

/// Runs the full study and writes `rate_report.csv`, `rate_plot.svg`, the
/// per-task rows, and a manifest into `out_dir`.
pub fn run_rate_study(
    config: &ExperimentConfig,
    out_dir: &Path,
    workers: usize,
    resume: bool,
) -> Result<RateStudyOutput, HarnessError> {
    config.validate()?;
    if config.n_grid.len() < 3 {
        return Err(HarnessError::Config(format!(
            "a rate study needs at least 3 window volumes, got {}",
            config.n_grid.len()
        )));
    }
    if config.replicates < 3 {
        return Err(HarnessError::Config(format!(
            "a rate study needs at least 3 replicates per volume, got {}",
            config.replicates
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let tasks_dir = out_dir.join("tasks");
    std::fs::create_dir_all(&tasks_dir)?;

    let ledger = SeedLedger::new(config.master_seed);
    let tasks: Vec<(f64, u64)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |rep| (n, rep)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Runtime(format!("worker pool: {e}")))?;
    let rows: Vec<TaskRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(n, replicate)| -> Result<TaskRow, HarnessError> {
                let row_path = task_row_path(&tasks_dir, n, replicate);
                if resume {
                    if let Some(row) = read_task_row(&row_path, n, replicate) {
                        log::info!("resume: reusing task n={n} replicate={replicate}");
                        return Ok(row);
                    }
                }
                let row = run_task(config, n, replicate, &ledger);
                std::fs::write(&row_path, format!("{}\n", row.to_csv()))?;
                Ok(row)
            })
            .collect::<Result<_, _>>()
    })?;

    // A volume with too many failures poisons the regression; stop instead
    // of reporting a rate computed from a biased subset.
    for &n in &config.n_grid {
        let (total, ok) = rows
            .iter()
            .filter(|r| r.n == n)
            .fold((0u64, 0u64), |(t, s), r| {
                (t + 1, s + u64::from(r.succeeded()))
            });
        if (ok as f64) < MIN_SUCCESS_FRACTION * total as f64 {
            return Err(HarnessError::Runtime(format!(
                "window volume n={n}: only {ok} of {total} replicates succeeded, \
                 below the {MIN_SUCCESS_FRACTION} floor"
            )));
        }
    }

    let pairs: Vec<(f64, Vec<f64>)> = config
        .n_grid
        .iter()
        .map(|&n| {
            let errors = rows
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.l1_error)
                .collect();
            (n, errors)
        })
        .collect();
    let report = rate_regression(&pairs, config.beta, config.covariate_dim)?;

    let report_path = out_dir.join("rate_report.csv");
    write_rate_report(&report_path, config, &report, &rows)?;
    let plot_path = out_dir.join("rate_plot.svg");
    let medians: Vec<(f64, f64)> = report
        .n_values
        .iter()
        .copied()
        .zip(report.median_errors.iter().copied())
        .collect();
    // Anchor the reference line at the first median so both lines start
    // together and the slopes are visually comparable.
    let theoretical_intercept = medians[0].1.ln() - report.theoretical_slope * medians[0].0.ln();
    render_rate_plot(
        &plot_path,
        &medians,
        (report.fitted_slope, report.intercept),
        (report.theoretical_slope, theoretical_intercept),
    )?;

    let mut manifest = RunManifest::new("rate-study", config.master_seed, config.to_toml_string());
    manifest.record_artifact(&report_path)?;
    manifest.record_artifact(&plot_path)?;
    manifest.streams = ledger.records();
    manifest.write(out_dir)?;

    Ok(RateStudyOutput {
        report,
        rows,
        report_path,
        plot_path,
    })
}

fn read_task_row(path: &Path, n: f64, replicate: u64) -> Option<TaskRow> {
    let text = std::fs::read_to_string(path).ok()?;
    let row = TaskRow::from_csv(text.trim_end())?;
    (row.n == n && row.replicate == replicate).then_some(row)
}

/// One row per task plus one median row per volume; regression scalars live
/// in the header comments.
fn write_rate_report(
    path: &Path,
    config: &ExperimentConfig,
    report: &RateReport,
    rows: &[TaskRow],
) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "# format=rate-report-v1")?;
    writeln!(w, "# master_seed={}", config.master_seed)?;
    writeln!(w, "# beta={}", config.beta)?;
    writeln!(w, "# alpha={}", config.alpha())?;
    writeln!(w, "# covariate_dim={}", config.covariate_dim)?;
    writeln!(w, "# replicates={}", config.replicates)?;
    writeln!(w, "# theoretical_slope={}", report.theoretical_slope)?;
    writeln!(w, "# fitted_slope={}", report.fitted_slope)?;
    writeln!(w, "# slope_stderr={}", report.slope_stderr)?;
    writeln!(w, "# intercept={}", report.intercept)?;
    writeln!(
        w,
        "n,replicate,status,points,l1_error,credible_l1_radius,acceptance_rate,epsilon_n,detail"
    )?;
    for row in rows {
        writeln!(w, "{}", row.to_csv())?;
    }
    for ((n, median), epsilon) in report
        .n_values
        .iter()
        .zip(report.median_errors.iter())
        .zip(report.epsilon_n.iter())
    {
        writeln!(w, "{n},median,ok,,{median},,,{epsilon},")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            n_grid: vec![16.0, 32.0, 64.0],
            replicates: 3,
            window_cells_per_lengthscale: 4,
            cube_cells_per_axis: 8,
            quadrature_cells_per_axis: 64,
            mcmc_iterations: 700,
            mcmc_burn_in: 200,
            mcmc_thinning: 10,
            master_seed: 90210,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn study_produces_report_plot_and_rows() {
        let config = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        let output = run_rate_study(&config, dir.path(), 1, false).unwrap();
        assert_eq!(output.rows.len(), 9);
        assert!(output.rows.iter().all(|r| r.succeeded()));
        assert_eq!(output.report.n_values, vec![16.0, 32.0, 64.0]);
        assert!(output.report_path.exists());
        assert!(output.plot_path.exists());
        assert!(dir.path().join("manifest.toml").exists());

        let report = std::fs::read_to_string(&output.report_path).unwrap();
        assert!(report.contains("# theoretical_slope=-0.3333333333333333"));
        let median_rows = report.lines().filter(|l| l.contains(",median,")).count();
        assert_eq!(median_rows, 3);
    }

    #[test]
    fn preconditions_are_config_errors() {
        let mut config = tiny_config();
        config.n_grid = vec![16.0, 32.0];
        let dir = tempfile::tempdir().unwrap();
        match run_rate_study(&config, dir.path(), 1, false) {
            Err(HarnessError::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }

        let mut config = tiny_config();
        config.replicates = 2;
        match run_rate_study(&config, dir.path(), 1, false) {
            Err(HarnessError::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn task_rows_round_trip_through_csv() {
        let row = TaskRow {
            n: 128.0,
            replicate: 4,
            points: Some(117),
            l1_error: Some(0.2631578947368421),
            credible_l1_radius: Some(0.41),
            acceptance_rate: Some(0.2875),
            detail: String::new(),
        };
        assert_eq!(TaskRow::from_csv(&row.to_csv()), Some(row));

        let failed = TaskRow {
            n: 64.0,
            replicate: 0,
            points: None,
            l1_error: None,
            credible_l1_radius: None,
            acceptance_rate: None,
            detail: "runtime failure: chain stalled; acceptance 0".to_string(),
        };
        let back = TaskRow::from_csv(&failed.to_csv()).unwrap();
        assert!(!back.succeeded());
        assert!(back.detail.contains("chain stalled"));
    }

    #[test]
    fn resume_reuses_rows_and_reproduces_the_report() {
        let config = tiny_config();
        let dir_a = tempfile::tempdir().unwrap();
        let first = run_rate_study(&config, dir_a.path(), 1, false).unwrap();
        let first_report = std::fs::read(&first.report_path).unwrap();

        // Poison one row file so reuse is observable: the resumed run must
        // take the stored row rather than recomputing it.
        let poisoned = task_row_path(&dir_a.path().join("tasks"), 16.0, 0);
        let mut row = first.rows[0].clone();
        assert_eq!((row.n, row.replicate), (16.0, 0));
        row.l1_error = Some(0.123456789);
        std::fs::write(&poisoned, format!("{}\n", row.to_csv())).unwrap();
        let resumed = run_rate_study(&config, dir_a.path(), 1, true).unwrap();
        assert_eq!(resumed.rows[0].l1_error, Some(0.123456789));

        // A fresh non-resumed run recomputes and matches the original bytes.
        let dir_b = tempfile::tempdir().unwrap();
        let second = run_rate_study(&config, dir_b.path(), 1, false).unwrap();
        assert_eq!(first_report, std::fs::read(&second.report_path).unwrap());
    }
}
