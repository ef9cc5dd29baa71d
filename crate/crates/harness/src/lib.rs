//! Experiment harness for covariate-driven Cox process studies.
//!
//! The library half of the `coxlab` binary. It layers run orchestration on
//! top of `coxlab-core`: experiment configuration, seed bookkeeping, dataset
//! and fit persistence, the rate study, and the validation suites. Every
//! entry point is deterministic given `(config, master_seed)`; worker count
//! and scheduling never change the artifacts.

pub mod config;
pub mod dataset;
pub mod fieldio;
pub mod fit;
pub mod manifest;
pub mod plot;
pub mod ratestudy;
pub mod seeding;
pub mod validate;

pub use config::{ConfigError, ExperimentConfig};
pub use dataset::{run_simulate, Dataset};
pub use fit::{run_fit, FitOutput};
pub use manifest::{sha256_file, sha256_hex, ArtifactRecord, RunManifest};
pub use ratestudy::{run_rate_study, RateStudyOutput, TaskRow};
pub use seeding::SeedLedger;
pub use validate::{run_validate, CheckResult, Suite, ValidationReport};

use thiserror::Error;

/// Top-level harness failure, mapped onto process exit codes by the CLI.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration or command line: exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// A validation suite reported failing checks: exit code 1.
    #[error("validation failed: {0}")]
    Validation(String),
    /// Anything that went wrong while running: exit code 3.
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 1,
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for HarnessError {
    fn from(err: ConfigError) -> Self {
        HarnessError::Config(err.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(err: std::io::Error) -> Self {
        HarnessError::Runtime(format!("io: {err}"))
    }
}

macro_rules! runtime_from {
    ($($ty:ty),+) => {$(
        impl From<$ty> for HarnessError {
            fn from(err: $ty) -> Self {
                HarnessError::Runtime(err.to_string())
            }
        }
    )+};
}

runtime_from!(
    coxlab_core::grid::GridError,
    coxlab_core::matern::CovarianceError,
    coxlab_core::randfield::FieldError,
    coxlab_core::covariates::CovariateError,
    coxlab_core::coxmodel::ModelError,
    coxlab_core::prior::PriorError,
    coxlab_core::metrics::MetricError,
    coxlab_core::inference::InferenceError
);
