//! Experiment configuration: the single knob surface for every subcommand.
//!
//! Configs are flat TOML whose keys are exactly the field names of
//! [`ExperimentConfig`]. Parsing rejects unknown keys so typos fail loudly
//! instead of silently falling back to defaults.

use coxlab_core::coxmodel::GroundTruthSpec;
use coxlab_core::grid::SpatialGrid;
use coxlab_core::inference::ChainConfig;
use coxlab_core::matern::CovarianceModel;
use coxlab_core::prior::{LinkFunction, PriorSpec};
use log::warn;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Full description of one experiment. Field names double as config keys.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Spatial dimension of the observation window (1 or 2).
    pub ambient_dim: usize,
    /// Number of covariate channels.
    pub covariate_dim: usize,
    /// Smoothness of the ground truth.
    pub beta: f64,
    /// Prior regularity. Defaults to `beta`; setting a different value is
    /// allowed but runs outside the matched-smoothness regime.
    pub alpha: Option<f64>,
    /// Window volumes, strictly increasing.
    pub n_grid: Vec<f64>,
    /// Independent replicates per window volume.
    pub replicates: u64,
    /// Matern lengthscale of the latent covariate fields.
    pub covariate_lengthscale: f64,
    /// Matern smoothness of the latent covariate fields.
    pub covariate_nu: f64,
    /// Lengthscale of the prior covariance on the covariate cube.
    pub prior_lengthscale: f64,
    /// Link function: "exponential" or "sigmoid".
    pub link: String,
    /// Upper intensity bound, required iff `link = "sigmoid"`.
    pub link_lambda_max: Option<f64>,
    /// Ground truth name: "sine", "fourier", "flat", or "zero".
    pub ground_truth: String,
    /// Window grid resolution, in cells per covariate lengthscale.
    pub window_cells_per_lengthscale: usize,
    /// Prior discretization: cells per axis of the unit-cube grid.
    pub cube_cells_per_axis: usize,
    /// Quadrature resolution per axis for covariate-space L1 distances.
    pub quadrature_cells_per_axis: usize,
    pub mcmc_iterations: u64,
    pub mcmc_burn_in: u64,
    pub mcmc_thinning: u64,
    pub mcmc_target_accept: f64,
    /// Burn-in step adaptation window; 0 disables adaptation.
    pub mcmc_adapt_window: u64,
    pub mcmc_initial_step: f64,
    /// Root seed; every random stream in a run is derived from it.
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    /// Desk-scale defaults: a one-dimensional matched-smoothness study that
    /// completes on a laptop in minutes.
    fn default() -> Self {
        ExperimentConfig {
            ambient_dim: 1,
            covariate_dim: 1,
            beta: 1.0,
            alpha: None,
            n_grid: vec![128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0],
            replicates: 10,
            covariate_lengthscale: 1.0,
            covariate_nu: 0.5,
            prior_lengthscale: 0.5,
            link: "exponential".to_string(),
            link_lambda_max: None,
            ground_truth: "sine".to_string(),
            window_cells_per_lengthscale: 8,
            cube_cells_per_axis: 128,
            quadrature_cells_per_axis: 512,
            mcmc_iterations: 20_000,
            mcmc_burn_in: 5_000,
            mcmc_thinning: 10,
            mcmc_target_accept: 0.3,
            mcmc_adapt_window: 100,
            mcmc_initial_step: 0.5,
            master_seed: 7_2620,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Canonical serialized form, embedded verbatim in run manifests.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Effective prior regularity.
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(self.beta)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !matches!(self.ambient_dim, 1 | 2) {
            return Err(invalid(format!(
                "ambient_dim must be 1 or 2, got {}",
                self.ambient_dim
            )));
        }
        if !matches!(self.covariate_dim, 1 | 2) {
            return Err(invalid(format!(
                "covariate_dim must be 1 or 2, got {}",
                self.covariate_dim
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if let Some(alpha) = self.alpha {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(invalid(format!("alpha must be positive, got {alpha}")));
            }
            if alpha != self.beta {
                warn!(
                    "alpha = {alpha} differs from beta = {}; running off the \
                     matched-smoothness regime, the usual rate guarantee does not apply",
                    self.beta
                );
            }
        }
        if self.n_grid.is_empty() {
            return Err(invalid("n_grid must be nonempty"));
        }
        for pair in self.n_grid.windows(2) {
            if pair[1] <= pair[0] {
                return Err(invalid(format!(
                    "n_grid must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if self.n_grid.iter().any(|&n| !(n.is_finite() && n > 0.0)) {
            return Err(invalid("n_grid entries must be positive and finite"));
        }
        if self.replicates < 1 {
            return Err(invalid("replicates must be at least 1"));
        }
        for (name, value) in [
            ("covariate_lengthscale", self.covariate_lengthscale),
            ("covariate_nu", self.covariate_nu),
            ("prior_lengthscale", self.prior_lengthscale),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {value}")));
            }
        }
        match self.link.as_str() {
            "exponential" => {
                if self.link_lambda_max.is_some() {
                    return Err(invalid(
                        "link_lambda_max is only valid with link = \"sigmoid\"",
                    ));
                }
            }
            "sigmoid" => {
                let cap = self
                    .link_lambda_max
                    .ok_or_else(|| invalid("link = \"sigmoid\" requires link_lambda_max"))?;
                if !(cap.is_finite() && cap > 0.0) {
                    return Err(invalid(format!(
                        "link_lambda_max must be positive, got {cap}"
                    )));
                }
            }
            other => {
                return Err(invalid(format!(
                    "unknown link {other:?}; expected \"exponential\" or \"sigmoid\""
                )));
            }
        }
        if self.window_cells_per_lengthscale == 0 {
            return Err(invalid("window_cells_per_lengthscale must be positive"));
        }
        if self.cube_cells_per_axis == 0 {
            return Err(invalid("cube_cells_per_axis must be positive"));
        }
        if self.quadrature_cells_per_axis == 0 {
            return Err(invalid("quadrature_cells_per_axis must be positive"));
        }
        if self.mcmc_iterations == 0 || self.mcmc_burn_in >= self.mcmc_iterations {
            return Err(invalid(format!(
                "mcmc_burn_in ({}) must be below mcmc_iterations ({})",
                self.mcmc_burn_in, self.mcmc_iterations
            )));
        }
        if self.mcmc_thinning == 0 {
            return Err(invalid("mcmc_thinning must be positive"));
        }
        if !(self.mcmc_target_accept > 0.0 && self.mcmc_target_accept < 1.0) {
            return Err(invalid(format!(
                "mcmc_target_accept must lie in (0, 1), got {}",
                self.mcmc_target_accept
            )));
        }
        if !(self.mcmc_initial_step > 0.0 && self.mcmc_initial_step <= 1.0) {
            return Err(invalid(format!(
                "mcmc_initial_step must lie in (0, 1], got {}",
                self.mcmc_initial_step
            )));
        }
        // Cheap dry runs of the derived objects so impossible combinations
        // (e.g. alpha too small for the covariate dimension) fail at load.
        self.link_function().map_err(invalid)?;
        self.ground_truth_spec()
            .map_err(|e| invalid(e.to_string()))?;
        self.covariance_model()
            .map_err(|e| invalid(e.to_string()))?;
        self.prior_spec().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    pub fn link_function(&self) -> Result<LinkFunction, String> {
        match self.link.as_str() {
            "exponential" => Ok(LinkFunction::Exponential),
            "sigmoid" => {
                let cap = self
                    .link_lambda_max
                    .ok_or("sigmoid link needs link_lambda_max")?;
                LinkFunction::scaled_sigmoid(cap).map_err(|e| e.to_string())
            }
            other => Err(format!("unknown link {other:?}")),
        }
    }

    pub fn ground_truth_spec(&self) -> Result<GroundTruthSpec, coxlab_core::coxmodel::ModelError> {
        let link = self
            .link_function()
            .map_err(coxlab_core::coxmodel::ModelError::UnknownGroundTruth)?;
        GroundTruthSpec::from_name(&self.ground_truth, self.covariate_dim, self.beta, link)
    }

    pub fn covariance_model(
        &self,
    ) -> Result<CovarianceModel, coxlab_core::matern::CovarianceError> {
        CovarianceModel::matern(self.covariate_nu, self.covariate_lengthscale)
    }

    pub fn prior_spec(&self) -> Result<PriorSpec, coxlab_core::prior::PriorError> {
        let link = self
            .link_function()
            .map_err(coxlab_core::prior::PriorError::InvalidParameter)?;
        PriorSpec::new(
            self.alpha(),
            self.covariate_dim,
            self.prior_lengthscale,
            link,
            self.cube_cells_per_axis,
        )
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            iterations: self.mcmc_iterations as usize,
            burn_in: self.mcmc_burn_in as usize,
            thinning: self.mcmc_thinning as usize,
            target_accept: self.mcmc_target_accept,
            adapt_window: self.mcmc_adapt_window as usize,
            initial_step: self.mcmc_initial_step,
        }
    }

    /// Observation window of volume `n`, discretized at the configured
    /// resolution relative to the covariate lengthscale.
    pub fn window_grid(&self, n: f64) -> Result<SpatialGrid, coxlab_core::grid::GridError> {
        let extent = n.powf(1.0 / self.ambient_dim as f64);
        let cells = (extent / self.covariate_lengthscale * self.window_cells_per_lengthscale as f64)
            .ceil() as usize;
        coxlab_core::grid::window_from_n(n, self.ambient_dim, cells.max(1))
    }
}
