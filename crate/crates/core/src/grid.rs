//! Regular grids: square observation windows of volume n centered at the
//! origin, and the unit-cube lattice carrying latent functions.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid parameter out of range: {0}")]
    InvalidParameter(String),
    #[error("point {0:?} lies outside the window")]
    OutsideWindow(Vec<f64>),
    #[error("cube grids support dimensions 1 and 2, got {0}")]
    UnsupportedDimension(usize),
}

/// Square window `[-extent/2, extent/2]^D` discretized into equal cells.
///
/// Field values and intensities attached to this grid live at cell centers
/// and extend piecewise-constant over their cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    cells_per_axis: usize,
    spacing: f64,
    lower: f64,
    volume: f64,
}

/// Window of volume `n`: extent `n^{1/D}` per axis, centered at the origin.
pub fn window_from_n(n: f64, dim: usize, cells_per_axis: usize) -> Result<SpatialGrid, GridError> {
    if n <= 0.0 || !n.is_finite() {
        return Err(GridError::InvalidParameter(format!(
            "window volume must be positive, got {n}"
        )));
    }
    if dim == 0 {
        return Err(GridError::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    if cells_per_axis == 0 {
        return Err(GridError::InvalidParameter(
            "cells_per_axis must be at least 1".into(),
        ));
    }
    let extent = n.powf(1.0 / dim as f64);
    Ok(SpatialGrid {
        dim,
        cells_per_axis,
        spacing: extent / cells_per_axis as f64,
        lower: -extent / 2.0,
        volume: n,
    })
}

impl SpatialGrid {
    /// Rebuild a grid from stored fields (persistence path). Values are taken
    /// verbatim so that round trips are bit-exact.
    pub fn from_parts(
        dim: usize,
        cells_per_axis: usize,
        spacing: f64,
        lower: f64,
        volume: f64,
    ) -> Result<Self, GridError> {
        if dim == 0
            || cells_per_axis == 0
            || !spacing.is_finite()
            || spacing <= 0.0
            || !volume.is_finite()
        {
            return Err(GridError::InvalidParameter("bad stored grid".into()));
        }
        Ok(SpatialGrid {
            dim,
            cells_per_axis,
            spacing,
            lower,
            volume,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    /// Cell side length h.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Per-axis lower bound (-extent/2).
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// Per-axis upper bound.
    pub fn upper(&self) -> f64 {
        self.lower + self.extent()
    }

    /// Nominal axis extent n^{1/D}.
    pub fn extent(&self) -> f64 {
        self.volume.powf(1.0 / self.dim as f64)
    }

    /// |cells_per_axis * h - n^{1/D}|: the one representable rounding allowed
    /// by construction.
    pub fn extent_rounding_error(&self) -> f64 {
        (self.cells_per_axis as f64 * self.spacing - self.extent()).abs()
    }

    /// Window volume n.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }

    /// Volume h^D of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Cells available per covariance lengthscale; fewer than ~4 leaves the
    /// field under-resolved.
    pub fn cells_per_lengthscale(&self, lengthscale: f64) -> f64 {
        lengthscale / self.spacing
    }

    /// Per-axis index of a flat cell index (first axis fastest).
    pub fn axis_indices(&self, cell: usize, out: &mut [usize]) {
        let mut rest = cell;
        for slot in out.iter_mut().take(self.dim) {
            *slot = rest % self.cells_per_axis;
            rest /= self.cells_per_axis;
        }
    }

    /// Center coordinates of a flat cell index.
    pub fn cell_center(&self, cell: usize, out: &mut [f64]) {
        let mut rest = cell;
        for slot in out.iter_mut().take(self.dim) {
            let idx = rest % self.cells_per_axis;
            rest /= self.cells_per_axis;
            *slot = self.lower + (idx as f64 + 0.5) * self.spacing;
        }
    }

    /// Flat index of the cell containing `x`, or an error outside the window.
    /// The upper boundary is attributed to the last cell.
    pub fn cell_of(&self, x: &[f64]) -> Result<usize, GridError> {
        if x.len() != self.dim {
            return Err(GridError::InvalidParameter(format!(
                "point has {} coordinates, window is {}-dimensional",
                x.len(),
                self.dim
            )));
        }
        let mut flat = 0usize;
        let mut stride = 1usize;
        for &xi in x {
            let rel = (xi - self.lower) / self.spacing;
            if rel < 0.0 || xi > self.upper() || !rel.is_finite() {
                return Err(GridError::OutsideWindow(x.to_vec()));
            }
            let idx = (rel as usize).min(self.cells_per_axis - 1);
            flat += idx * stride;
            stride *= self.cells_per_axis;
        }
        Ok(flat)
    }
}

/// Lattice on [0,1]^d with `cells_per_axis` cells and nodes at the corners;
/// node functions are evaluated by multilinear interpolation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeGrid {
    dim: usize,
    cells_per_axis: usize,
}

/// Interpolation stencil: node indices and weights for one evaluation point.
/// At most 2^d corners; d <= 2 keeps this a fixed-size array.
#[derive(Debug, Clone, Copy)]
pub struct InterpStencil {
    pub idx: [usize; 4],
    pub weight: [f64; 4],
    pub len: usize,
}

impl InterpStencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len {
            acc += self.weight[k] * values[self.idx[k]];
        }
        acc
    }
}

impl CubeGrid {
    pub fn new(dim: usize, cells_per_axis: usize) -> Result<Self, GridError> {
        if dim == 0 || dim > 2 {
            return Err(GridError::UnsupportedDimension(dim));
        }
        if cells_per_axis == 0 {
            return Err(GridError::InvalidParameter(
                "cube grid needs at least one cell".into(),
            ));
        }
        Ok(CubeGrid {
            dim,
            cells_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.cells_per_axis + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    /// Coordinates of a flat node index (first axis fastest).
    pub fn node_coord(&self, node: usize, out: &mut [f64]) {
        let npa = self.nodes_per_axis();
        let mut rest = node;
        for slot in out.iter_mut().take(self.dim) {
            *slot = (rest % npa) as f64 / self.cells_per_axis as f64;
            rest /= npa;
        }
    }

    /// Stencil for multilinear interpolation at `z`, clamped to [0,1]^d.
    /// Returns the clamp flag so callers can log out-of-cube evaluations.
    pub fn stencil(&self, z: &[f64]) -> (InterpStencil, bool) {
        debug_assert_eq!(z.len(), self.dim);
        let m = self.cells_per_axis;
        let npa = self.nodes_per_axis();
        let mut clamped = false;
        let mut lo = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for (a, &za) in z.iter().enumerate().take(self.dim) {
            let mut t = za;
            if !(0.0..=1.0).contains(&t) {
                clamped = true;
                t = t.clamp(0.0, 1.0);
            }
            let scaled = t * m as f64;
            let cell = (scaled as usize).min(m - 1);
            lo[a] = cell;
            frac[a] = scaled - cell as f64;
        }
        let stencil = match self.dim {
            1 => InterpStencil {
                idx: [lo[0], lo[0] + 1, 0, 0],
                weight: [1.0 - frac[0], frac[0], 0.0, 0.0],
                len: 2,
            },
            _ => {
                let base = lo[0] + npa * lo[1];
                let (tx, ty) = (frac[0], frac[1]);
                InterpStencil {
                    idx: [base, base + 1, base + npa, base + npa + 1],
                    weight: [
                        (1.0 - tx) * (1.0 - ty),
                        tx * (1.0 - ty),
                        (1.0 - tx) * ty,
                        tx * ty,
                    ],
                    len: 4,
                }
            }
        };
        (stencil, clamped)
    }

    /// Multilinear interpolation of node values at `z` (clamped to the cube).
    pub fn interp(&self, values: &[f64], z: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.num_nodes());
        let (stencil, clamped) = self.stencil(z);
        if clamped {
            log::warn!("evaluation point {z:?} clamped to [0,1]^{}", self.dim);
        }
        stencil.apply(values)
    }
}
