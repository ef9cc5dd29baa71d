//! Covariate construction: each latent Gaussian field is pushed through the
//! standard normal CDF, giving stationary covariate channels with uniform
//! marginals on (0, 1). Intensities read covariates, never raw fields.

use thiserror::Error;

use crate::randfield::FieldRealization;

/// Values are clamped into [EPS, 1 - EPS] so downstream cube interpolation
/// always sees the open unit interval. erfc only saturates past |x| ~ 38, so
/// clamps are effectively impossible for unit-variance latents; the count
/// exists to prove that.
const CLAMP_EPS: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum CovariateError {
    #[error("need at least one latent field")]
    EmptyLatents,
    #[error("latent field {index} has shape ({dim}, {cells_per_axis}), expected ({expected_dim}, {expected_cells})")]
    ShapeMismatch {
        index: usize,
        dim: usize,
        cells_per_axis: usize,
        expected_dim: usize,
        expected_cells: usize,
    },
    #[error("latent field {index} contains a non-finite value")]
    NonFinite { index: usize },
    #[error("invalid covariate buffer: {0}")]
    InvalidBuffer(String),
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// d covariate channels on the cells of one spatial grid, channel-major:
/// `values[h * num_cells + cell]`. Each channel extends piecewise-constant
/// over its cell, like the latent fields it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateField {
    dim: usize,
    covariate_dim: usize,
    cells_per_axis: usize,
    values: Vec<f64>,
    clamp_count: u64,
}

impl CovariateField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }

    pub fn clamp_count(&self) -> u64 {
        self.clamp_count
    }

    pub fn channel(&self, h: usize) -> &[f64] {
        let n = self.num_cells();
        &self.values[h * n..(h + 1) * n]
    }

    pub fn value(&self, cell: usize, h: usize) -> f64 {
        self.values[h * self.num_cells() + cell]
    }

    /// Writes the d covariates of one cell into `out`.
    pub fn at_cell(&self, cell: usize, out: &mut [f64]) {
        let n = self.num_cells();
        for (h, slot) in out.iter_mut().enumerate().take(self.covariate_dim) {
            *slot = self.values[h * n + cell];
        }
    }

    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    /// Rebuilds a field from persisted parts, verbatim.
    pub fn from_raw(
        dim: usize,
        covariate_dim: usize,
        cells_per_axis: usize,
        values: Vec<f64>,
        clamp_count: u64,
    ) -> Result<Self, CovariateError> {
        if dim == 0 || covariate_dim == 0 || cells_per_axis == 0 {
            return Err(CovariateError::InvalidBuffer("zero dimension".into()));
        }
        let expected = covariate_dim * cells_per_axis.pow(dim as u32);
        if values.len() != expected {
            return Err(CovariateError::InvalidBuffer(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        Ok(CovariateField {
            dim,
            covariate_dim,
            cells_per_axis,
            values,
            clamp_count,
        })
    }
}

/// Applies the CDF transform to each latent field. All fields must share one
/// grid shape; channel h comes from `latents[h]`.
pub fn build_covariates(latents: &[FieldRealization]) -> Result<CovariateField, CovariateError> {
    let first = latents.first().ok_or(CovariateError::EmptyLatents)?;
    let dim = first.dim;
    let cells = first.cells_per_axis;
    let num_cells = cells.pow(dim as u32);
    let mut values = Vec::with_capacity(latents.len() * num_cells);
    let mut clamp_count = 0u64;
    for (index, latent) in latents.iter().enumerate() {
        if latent.dim != dim || latent.cells_per_axis != cells || latent.values.len() != num_cells {
            return Err(CovariateError::ShapeMismatch {
                index,
                dim: latent.dim,
                cells_per_axis: latent.cells_per_axis,
                expected_dim: dim,
                expected_cells: cells,
            });
        }
        for &w in &latent.values {
            if !w.is_finite() {
                return Err(CovariateError::NonFinite { index });
            }
            let z = phi(w);
            if z < CLAMP_EPS {
                clamp_count += 1;
                values.push(CLAMP_EPS);
            } else if z > 1.0 - CLAMP_EPS {
                clamp_count += 1;
                values.push(1.0 - CLAMP_EPS);
            } else {
                values.push(z);
            }
        }
    }
    Ok(CovariateField {
        dim,
        covariate_dim: latents.len(),
        cells_per_axis: cells,
        values,
        clamp_count,
    })
}

/// Spatial uniformity diagnostics for one channel of one realization. The KS
/// distance is against U(0, 1); the drift compares the means of the two
/// halves of the cell array (the lagging axis split). Both shrink with window
/// size for an ergodic covariate, but within one realization correlated cells
/// keep them well above the iid scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityReport {
    pub ks_uniform: f64,
    pub half_drift: f64,
}

pub fn ergodicity_diagnostic(field: &CovariateField, channel: usize) -> ErgodicityReport {
    let values = field.channel(channel);
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("covariates are finite"));
    let n = sorted.len() as f64;
    let mut ks = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let hi = (i + 1) as f64 / n - v;
        let lo = v - i as f64 / n;
        ks = ks.max(hi.abs()).max(lo.abs());
    }
    let half = values.len() / 2;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let half_drift = (mean(&values[..half]) - mean(&values[half..])).abs();
    ErgodicityReport {
        ks_uniform: ks,
        half_drift,
    }
}
