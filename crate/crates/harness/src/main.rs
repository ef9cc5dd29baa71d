use clap::{Args, Parser, Subcommand};
use coxlab::{
    run_fit, run_rate_study, run_simulate, run_validate, ExperimentConfig, HarnessError, Suite,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "coxlab",
    about = "Simulation and posterior inference for covariate-driven Cox processes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML). Defaults to the built-in desk-scale config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one dataset per configured window volume.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory; one subdirectory per window volume.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the posterior on a dataset directory written by `simulate`.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for summary, trace, and manifest.
        #[arg(long)]
        out: PathBuf,
        /// Dataset directory containing covariates.bin and pattern.csv.
        dataset: PathBuf,
    },
    /// Run the contraction-rate study over the configured volume grid.
    RateStudy {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for the report, plot, and per-task rows.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses all available cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Reuse per-task rows already present in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Run statistical validation suites against their oracles.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// fields, covariates, likelihood, sampler, metrics, or all.
        #[arg(default_value = "all")]
        suite: String,
        /// Optional directory for the machine-readable JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Simulate { common, out } => {
            let config = load_config(&common)?;
            let dirs = run_simulate(&config, &out)?;
            for dir in dirs {
                println!("dataset {}", dir.display());
            }
            Ok(0)
        }
        Command::Fit {
            common,
            out,
            dataset,
        } => {
            let config = load_config(&common)?;
            let output = run_fit(&config, &dataset, &out)?;
            println!(
                "fit complete: {} samples, acceptance {:.3}, credible L1 radius {:.4}{}",
                output.sample_count,
                output.acceptance_rate,
                output.summary.credible_l1_radius,
                match output.summary.l1_error_of_mean {
                    Some(err) => format!(", L1 error of mean {err:.4}"),
                    None => String::new(),
                }
            );
            println!("outputs in {}", out.display());
            Ok(0)
        }
        Command::RateStudy {
            common,
            out,
            workers,
            resume,
        } => {
            let config = load_config(&common)?;
            let output = run_rate_study(&config, &out, workers, resume)?;
            println!(
                "rate study complete: fitted slope {:.4} (stderr {:.4}), reference {:.4}",
                output.report.fitted_slope,
                output.report.slope_stderr,
                output.report.theoretical_slope
            );
            println!("report {}", output.report_path.display());
            println!("plot {}", output.plot_path.display());
            Ok(0)
        }
        Command::Validate { common, suite, out } => {
            let config = load_config(&common)?;
            let suite: Suite = suite.parse().map_err(HarnessError::Config)?;
            let report = run_validate(suite, config.master_seed)?;
            print!("{}", report.render_text());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let path = dir.join("validation.json");
                std::fs::write(&path, report.to_json())?;
                println!("report {}", path.display());
            }
            if report.passed() {
                println!("validation passed: {} checks", report.checks.len());
                Ok(0)
            } else {
                let failed = report.checks.iter().filter(|c| !c.passed).count();
                eprintln!(
                    "validation FAILED: {failed} of {} checks",
                    report.checks.len()
                );
                Ok(1)
            }
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    };
    std::process::exit(code);
}
