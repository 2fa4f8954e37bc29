use crate::error::{FwiError, Result};
use crate::scalar::Real;

use super::setup::Space;

const LOCATE_TOL: f64 = 1e-10;

/// Sparse evaluation table: row `k` holds `(dof, φ_dof(x_k))` for point `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointInterpolator {
    pub points: Vec<[f64; 2]>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

/// Triangle containing `p` and its reference coordinates, or `None`.
pub fn locate<T: Real>(sp: &Space<T>, p: [f64; 2]) -> Option<(usize, [f64; 2])> {
    let mut best: Option<(usize, [f64; 2], f64)> = None;
    for t in 0..sp.n_elements() {
        let [a, b, c] = sp.mesh.triangle_points(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let dx = [p[0] - a[0], p[1] - a[1]];
        let xi = ((c[1] - a[1]) * dx[0] - (c[0] - a[0]) * dx[1]) / det;
        let eta = (-(b[1] - a[1]) * dx[0] + (b[0] - a[0]) * dx[1]) / det;
        let margin = xi.min(eta).min(1.0 - xi - eta);
        if margin >= -LOCATE_TOL && best.is_none_or(|(_, _, m)| margin > m) {
            best = Some((t, [xi.max(0.0), eta.max(0.0)], margin));
        }
    }
    best.map(|(t, xi, _)| (t, xi))
}

impl PointInterpolator {
    pub fn new<T: Real>(sp: &Space<T>, points: &[[f64; 2]]) -> Result<Self> {
        let mut rows = Vec::with_capacity(points.len());
        for &p in points {
            let (t, xi) = locate(sp, p).ok_or(FwiError::PointOutside { x: p[0], z: p[1], what: "the mesh" })?;
            let vals = sp.element.eval_basis(xi)?;
            let dofs = sp.dofmap.element_dofs(t);
            let mut row: Vec<(usize, f64)> =
                dofs.iter().zip(vals).filter(|(_, v)| v.abs() > 1e-14).map(|(&d, v)| (d, v)).collect();
            // snap exact node hits to a single unit weight
            if let Some(k) = row.iter().position(|(_, v)| (v - 1.0).abs() < 1e-12) {
                if row.iter().enumerate().all(|(i, (_, v))| i == k || v.abs() < 1e-12) {
                    row = vec![(row[k].0, 1.0)];
                }
            }
            rows.push(row);
        }
        Ok(PointInterpolator { points: points.to_vec(), rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `H u`.
    pub fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        self.rows.iter().map(|row| row.iter().map(|&(d, w)| T::lit(w) * u[d]).sum()).collect()
    }

    /// `H u` into `out`.
    pub fn eval_into<T: Real>(&self, u: &[T], out: &mut [T]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(d, w)| T::lit(w) * u[d]).sum();
        }
    }

    /// `out += Hᵀ r`.
    pub fn scatter_add<T: Real>(&self, r: &[T], out: &mut [T]) {
        for (row, &v) in self.rows.iter().zip(r) {
            for &(d, w) in row {
                out[d] += T::lit(w) * v;
            }
        }
    }
}
