//! Regular 2D sample grids shared by velocity rasters and sizing fields.

use crate::error::{FwiError, Result};

/// Geometry of a regular grid; samples are stored with `x` varying fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub nx: usize,
    pub nz: usize,
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
}

impl Grid2 {
    pub fn new(nx: usize, nz: usize, origin: [f64; 2], spacing: [f64; 2]) -> Result<Self> {
        if nx == 0 || nz == 0 {
            return Err(FwiError::invalid("grid must have at least one sample per axis"));
        }
        if !(spacing[0] > 0.0 && spacing[1] > 0.0 && spacing[0].is_finite() && spacing[1].is_finite()) {
            return Err(FwiError::invalid(format!("grid spacing must be positive, got {spacing:?}")));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(FwiError::invalid("grid origin must be finite"));
        }
        Ok(Grid2 { nx, nz, origin, spacing })
    }

    /// Grid with spacing close to `h` whose samples span `[x0, x1] × [z0, z1]` exactly.
    pub fn covering(x0: f64, x1: f64, z0: f64, z1: f64, h: f64) -> Result<Self> {
        let nx = ((x1 - x0) / h).ceil().max(1.0) as usize + 1;
        let nz = ((z1 - z0) / h).ceil().max(1.0) as usize + 1;
        Grid2::new(nx, nz, [x0, z0], [(x1 - x0) / (nx - 1) as f64, (z1 - z0) / (nz - 1) as f64])
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.spacing[0], self.origin[1] + j as f64 * self.spacing[1]]
    }

    /// Bilinear interpolation; points outside the grid take the nearest edge value.
    pub fn sample(&self, values: &[f64], p: [f64; 2]) -> f64 {
        let (i0, i1, tx) = axis(p[0], self.origin[0], self.spacing[0], self.nx);
        let (j0, j1, tz) = axis(p[1], self.origin[1], self.spacing[1], self.nz);
        let v00 = values[self.index(i0, j0)];
        let v10 = values[self.index(i1, j0)];
        let v01 = values[self.index(i0, j1)];
        let v11 = values[self.index(i1, j1)];
        (1.0 - tz) * ((1.0 - tx) * v00 + tx * v10) + tz * ((1.0 - tx) * v01 + tx * v11)
    }
}

fn axis(x: f64, x0: f64, dx: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let s = ((x - x0) / dx).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    (i, i + 1, s - i as f64)
}
