//! End-to-end tests of the command line: subcommands, flags, exit codes.

use std::path::Path;
use std::process::Command;

fn coxlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coxlab"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const FAST_CONFIG: &str = "\
n_grid = [16.0, 32.0, 64.0]
replicates = 3
window_cells_per_lengthscale = 4
cube_cells_per_axis = 8
quadrature_cells_per_axis = 64
mcmc_iterations = 700
mcmc_burn_in = 200
mcmc_thinning = 10
master_seed = 20260819
";

#[test]
fn simulate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FAST_CONFIG);
    let data_dir = dir.path().join("data");

    let output = coxlab()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&data_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "simulate failed: {output:?}");
    assert!(data_dir.join("n16/covariates.bin").exists());
    assert!(data_dir.join("n16/pattern.csv").exists());
    assert!(data_dir.join("n16/manifest.toml").exists());

    let fit_dir = dir.path().join("fit");
    let output = coxlab()
        .args(["fit", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&fit_dir)
        .arg(data_dir.join("n16"))
        .output()
        .unwrap();
    assert!(output.status.success(), "fit failed: {output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(
        stdout.contains("fit complete"),
        "unexpected output: {stdout}"
    );
    assert!(fit_dir.join("summary.csv").exists());
    assert!(fit_dir.join("trace.csv").exists());
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FAST_CONFIG);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");

    for (out, seed) in [(&out_a, "1"), (&out_b, "2")] {
        let status = coxlab()
            .args(["simulate", "--config"])
            .arg(&config)
            .args(["--seed", seed, "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out_a.join("n16/pattern.csv")).unwrap();
    let b = std::fs::read(out_b.join("n16/pattern.csv")).unwrap();
    assert_ne!(a, b, "different seeds must give different patterns");
}

#[test]
fn validate_metrics_suite_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let output = coxlab()
        .args(["validate", "metrics", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(output.status.success(), "validate failed: {output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("[pass] metrics/distance_identities"));
    let json = std::fs::read_to_string(dir.path().join("validation.json")).unwrap();
    assert!(json.contains("distance_gap_scaling"));
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();

    // Unknown config key.
    let config = write_config(dir.path(), "bogus_knob = 1\n");
    let output = coxlab()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "unknown key: {output:?}");

    // Invalid field combination.
    let config = write_config(dir.path(), "n_grid = [64.0, 32.0]\n");
    let output = coxlab()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "bad n_grid: {output:?}");

    // Unknown validation suite.
    let output = coxlab().args(["validate", "nonsense"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2), "bad suite: {output:?}");

    // Missing config file.
    let output = coxlab()
        .args(["simulate", "--config", "/nonexistent/config.toml", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "missing config: {output:?}");
}

#[test]
fn runtime_failures_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FAST_CONFIG);
    let output = coxlab()
        .args(["fit", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg(dir.path().join("no-such-dataset"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "missing dataset: {output:?}");
}

#[test]
fn rate_study_cli_writes_report_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), FAST_CONFIG);
    let out = dir.path().join("study");

    let output = coxlab()
        .args(["rate-study", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--workers", "1"])
        .output()
        .unwrap();
    assert!(output.status.success(), "rate study failed: {output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(
        stdout.contains("fitted slope"),
        "unexpected output: {stdout}"
    );
    assert!(out.join("rate_report.csv").exists());
    assert!(out.join("rate_plot.svg").exists());
    let first = std::fs::read(out.join("rate_report.csv")).unwrap();

    // Resume over the finished study reuses every row.
    let status = coxlab()
        .args(["rate-study", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--workers", "1", "--resume"])
        .status()
        .unwrap();
    assert!(status.success());
    let second = std::fs::read(out.join("rate_report.csv")).unwrap();
    assert_eq!(first, second);
}
