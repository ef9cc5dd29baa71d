//! Stationary Gaussian field sampling on regular grids by circulant
//! embedding. The covariance is wrapped onto a padded torus, diagonalized by
//! FFT, and realizations come from one complex transform per draw, so a
//! sampler built once serves arbitrarily many replicates.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::grid::SpatialGrid;
use crate::matern::{matern_cov, CovarianceError, CovarianceModel};

/// Pad factors tried in order before giving up on an embedding.
const PAD_FACTORS: [usize; 4] = [1, 2, 4, 8];
/// Negative eigenvalues above this fraction of the largest one are treated as
/// round-off and clipped to zero; anything below fails the embedding.
const CLIP_FRACTION: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("field sampling supports dimensions 1 and 2, got {0}")]
    UnsupportedDimension(usize),
    #[error(
        "circulant embedding not positive semidefinite: min eigenvalue {min_eigenvalue:e} at pad factor {pad_factor}"
    )]
    EmbeddingFailure {
        min_eigenvalue: f64,
        pad_factor: usize,
    },
    #[error("covariance evaluation failed: {0}")]
    Covariance(#[from] CovarianceError),
    #[error("invalid sampler input: {0}")]
    InvalidParameter(String),
}

/// One realization of the field at the cell centers of a [`SpatialGrid`],
/// stored first axis fastest like every grid-shaped buffer in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub dim: usize,
    pub cells_per_axis: usize,
    pub values: Vec<f64>,
}

/// Diagnostics from a successful embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingReport {
    pub pad_factor: usize,
    pub torus_per_axis: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub clipped: usize,
}

/// Sampler with precomputed torus spectrum for one (grid, covariance) pair.
pub struct FieldSampler {
    dim: usize,
    cells_per_axis: usize,
    torus_per_axis: usize,
    sqrt_eigen: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    report: EmbeddingReport,
}

impl FieldSampler {
    pub fn new(grid: &SpatialGrid, model: &CovarianceModel) -> Result<Self, FieldError> {
        let dim = grid.dim();
        if dim == 0 || dim > 2 {
            return Err(FieldError::UnsupportedDimension(dim));
        }
        let cells = grid.cells_per_axis();
        let spacing = grid.spacing();
        let mut planner = FftPlanner::new();
        let mut last_failure = (0.0f64, 0usize);
        for &pad in &PAD_FACTORS {
            let torus = (2 * cells * pad).next_power_of_two();
            let fft = planner.plan_fft_forward(torus);
            let eigen = torus_spectrum(dim, torus, spacing, model, fft.as_ref())?;
            let max_eigenvalue = eigen.iter().cloned().fold(f64::MIN, f64::max);
            let min_eigenvalue = eigen.iter().cloned().fold(f64::MAX, f64::min);
            if min_eigenvalue >= -CLIP_FRACTION * max_eigenvalue {
                let mut clipped = 0usize;
                let sqrt_eigen = eigen
                    .into_iter()
                    .map(|l| {
                        if l < 0.0 {
                            clipped += 1;
                            0.0
                        } else {
                            l.sqrt()
                        }
                    })
                    .collect();
                return Ok(FieldSampler {
                    dim,
                    cells_per_axis: cells,
                    torus_per_axis: torus,
                    sqrt_eigen,
                    fft,
                    report: EmbeddingReport {
                        pad_factor: pad,
                        torus_per_axis: torus,
                        min_eigenvalue,
                        max_eigenvalue,
                        clipped,
                    },
                });
            }
            last_failure = (min_eigenvalue, pad);
        }
        Err(FieldError::EmbeddingFailure {
            min_eigenvalue: last_failure.0,
            pad_factor: last_failure.1,
        })
    }

    pub fn report(&self) -> &EmbeddingReport {
        &self.report
    }

    /// Draws one realization. Pure function of the sampler and the RNG state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldRealization {
        let torus_len = self.sqrt_eigen.len();
        let mut buf: Vec<Complex<f64>> = Vec::with_capacity(torus_len);
        for &s in &self.sqrt_eigen {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            buf.push(Complex::new(a * s, b * s));
        }
        match self.dim {
            1 => self.fft.process(&mut buf),
            2 => fft2_in_place(&mut buf, self.torus_per_axis, self.fft.as_ref()),
            _ => unreachable!("dimension validated in constructor"),
        }
        let norm = 1.0 / (torus_len as f64).sqrt();
        let m = self.cells_per_axis;
        let values = match self.dim {
            1 => buf[..m].iter().map(|z| z.re * norm).collect(),
            _ => {
                let mut out = Vec::with_capacity(m * m);
                for j2 in 0..m {
                    let row = j2 * self.torus_per_axis;
                    out.extend(buf[row..row + m].iter().map(|z| z.re * norm));
                }
                out
            }
        };
        FieldRealization {
            dim: self.dim,
            cells_per_axis: m,
            values,
        }
    }
}

/// Eigenvalues of the covariance wrapped on the torus: the unnormalized
/// forward FFT of the first row of the circulant (block-circulant) matrix.
fn torus_spectrum(
    dim: usize,
    torus: usize,
    spacing: f64,
    model: &CovarianceModel,
    fft: &dyn Fft<f64>,
) -> Result<Vec<f64>, FieldError> {
    let wrap = |j: usize| -> f64 {
        let d = j.min(torus - j);
        d as f64 * spacing
    };
    let mut buf: Vec<Complex<f64>> = match dim {
        1 => (0..torus)
            .map(|j| matern_cov(wrap(j), model).map(|k| Complex::new(k, 0.0)))
            .collect::<Result<_, _>>()?,
        2 => {
            let mut b = Vec::with_capacity(torus * torus);
            for j2 in 0..torus {
                let d2 = wrap(j2);
                for j1 in 0..torus {
                    let d1 = wrap(j1);
                    let r = (d1 * d1 + d2 * d2).sqrt();
                    b.push(Complex::new(matern_cov(r, model)?, 0.0));
                }
            }
            b
        }
        _ => unreachable!(),
    };
    match dim {
        1 => fft.process(&mut buf),
        _ => fft2_in_place(&mut buf, torus, fft),
    }
    // The row is symmetric, so the spectrum is real up to round-off.
    Ok(buf.into_iter().map(|z| z.re).collect())
}

/// Row-column 2-D FFT of an m-by-m buffer stored first axis fastest.
fn fft2_in_place(buf: &mut [Complex<f64>], m: usize, fft: &dyn Fft<f64>) {
    debug_assert_eq!(buf.len(), m * m);
    for row in buf.chunks_exact_mut(m) {
        fft.process(row);
    }
    transpose_square(buf, m);
    for row in buf.chunks_exact_mut(m) {
        fft.process(row);
    }
    transpose_square(buf, m);
}

fn transpose_square(buf: &mut [Complex<f64>], m: usize) {
    for j2 in 0..m {
        for j1 in (j2 + 1)..m {
            buf.swap(j1 + j2 * m, j2 + j1 * m);
        }
    }
}

/// Builds a sampler and reports its embedding without drawing a sample.
pub fn check_embedding(
    grid: &SpatialGrid,
    model: &CovarianceModel,
) -> Result<EmbeddingReport, FieldError> {
    FieldSampler::new(grid, model).map(|s| s.report.clone())
}

/// One-shot draw. Building [`FieldSampler`] directly amortizes the spectrum
/// across replicates.
pub fn sample_field<R: Rng + ?Sized>(
    grid: &SpatialGrid,
    model: &CovarianceModel,
    rng: &mut R,
) -> Result<FieldRealization, FieldError> {
    Ok(FieldSampler::new(grid, model)?.sample(rng))
}
