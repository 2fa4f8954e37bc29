//! Matrix-free element kernels. Every quadrature point is an element node,
//! so nodal values are read directly at the quadrature points.

use std::collections::BTreeMap;

use crate::scalar::Real;

use super::setup::{FieldSetup, Space};

#[inline]
fn to_phys<T: Real>(m: &[[T; 2]; 2], g: [T; 2]) -> [T; 2] {
    [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
}

/// `Mᵀ v` for the 2×2 inverse-transpose Jacobian.
#[inline]
fn to_ref<T: Real>(m: &[[T; 2]; 2], v: [T; 2]) -> [T; 2] {
    [m[0][0] * v[0] + m[1][0] * v[1], m[0][1] * v[0] + m[1][1] * v[1]]
}

impl<T: Real> Space<T> {
    /// Physical gradients of `u` at every node of element `t`, written to `out`.
    #[inline]
    pub(crate) fn element_gradients(&self, t: usize, u: &[T], out: &mut [[T; 2]]) {
        let n = self.nodes_per_element();
        let dofs = self.dofmap.element_dofs(t);
        let geo = &self.geometry[t];
        for q in 0..n {
            let row = &self.grad_ref[q * n..(q + 1) * n];
            let mut g = [T::zero(); 2];
            for (gi, &d) in row.iter().zip(dofs) {
                let v = u[d];
                g[0] += gi[0] * v;
                g[1] += gi[1] * v;
            }
            out[q] = to_phys(&geo.jinv_t, g);
        }
    }

    /// Adds `∫ ∇φ_i · v` to `out[i]` for the physical vector field `v` given at
    /// the nodes of element `t` (already multiplied by the quadrature weight).
    #[inline]
    pub(crate) fn element_scatter_grad(&self, t: usize, v: &[[T; 2]], out: &mut [T]) {
        let n = self.nodes_per_element();
        let dofs = self.dofmap.element_dofs(t);
        let geo = &self.geometry[t];
        for (q, vq) in v.iter().enumerate().take(n) {
            let r = to_ref(&geo.jinv_t, *vq);
            let row = &self.grad_ref[q * n..(q + 1) * n];
            for (gi, &d) in row.iter().zip(dofs) {
                out[d] += gi[0] * r[0] + gi[1] * r[1];
            }
        }
    }

    /// `out += Gᵀ p`: the weak divergence `∫ p · ∇φ_i` over damped elements.
    pub fn apply_div_t(&self, px: &[T], pz: &[T], out: &mut [T]) {
        self.div_t_on(self.pml_elements.iter().copied(), px, pz, out);
    }

    /// `out[i] += ∫ v · ∇φ_i` over the whole mesh for a nodal vector field `v`.
    pub fn weak_divergence(&self, vx: &[T], vz: &[T], out: &mut [T]) {
        self.div_t_on(0..self.n_elements(), vx, vz, out);
    }

    fn div_t_on(&self, elements: impl Iterator<Item = usize>, px: &[T], pz: &[T], out: &mut [T]) {
        let n = self.nodes_per_element();
        let mut v = vec![[T::zero(); 2]; n];
        for t in elements {
            let dofs = self.dofmap.element_dofs(t);
            let det = self.geometry[t].det;
            for q in 0..n {
                let w = self.weights[q] * det;
                v[q] = [w * px[dofs[q]], w * pz[dofs[q]]];
            }
            self.element_scatter_grad(t, &v, out);
        }
    }

    /// `(wx, wz) += G u`: lumped-weighted nodal gradient, the transpose of [`Space::apply_div_t`].
    pub fn apply_weighted_grad(&self, u: &[T], wx: &mut [T], wz: &mut [T]) {
        let n = self.nodes_per_element();
        let mut g = vec![[T::zero(); 2]; n];
        for &t in &self.pml_elements {
            self.element_gradients(t, u, &mut g);
            let dofs = self.dofmap.element_dofs(t);
            let det = self.geometry[t].det;
            for q in 0..n {
                let w = self.weights[q] * det;
                wx[dofs[q]] += w * g[q][0];
                wz[dofs[q]] += w * g[q][1];
            }
        }
    }

    /// `out[g] += Σ w_q |J| ∇a · ∇b` at node `g`: the pointwise integrand of the
    /// wavespeed derivative of the stiffness form, lumped at the nodes.
    pub fn accumulate_grad_product(&self, a: &[T], b: &[T], out: &mut [T]) {
        let n = self.nodes_per_element();
        let mut ga = vec![[T::zero(); 2]; n];
        let mut gb = vec![[T::zero(); 2]; n];
        for t in 0..self.n_elements() {
            self.element_gradients(t, a, &mut ga);
            self.element_gradients(t, b, &mut gb);
            let dofs = self.dofmap.element_dofs(t);
            let det = self.geometry[t].det;
            for q in 0..n {
                out[dofs[q]] += self.weights[q] * det * (ga[q][0] * gb[q][0] + ga[q][1] * gb[q][1]);
            }
        }
    }
}

impl<T: Real> FieldSetup<T> {
    /// `out = K u` with `K_ij = ∫ c² ∇φ_i · ∇φ_j`.
    pub fn apply_stiffness_into(&self, u: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        self.add_stiffness(u, out);
    }

    /// `out += K u`.
    pub fn add_stiffness(&self, u: &[T], out: &mut [T]) {
        self.add_stiffness_on(0..self.space.n_elements(), u, out);
    }

    /// `out += K_E u`, the stiffness assembled over the elements `E` only.
    pub fn add_stiffness_on(&self, elements: impl IntoIterator<Item = usize>, u: &[T], out: &mut [T]) {
        let sp = &*self.space;
        let n = sp.nodes_per_element();
        let mut g = vec![[T::zero(); 2]; n];
        for t in elements {
            sp.element_gradients(t, u, &mut g);
            let dofs = sp.dofmap.element_dofs(t);
            let det = sp.geometry[t].det;
            for q in 0..n {
                let s = sp.weights[q] * det * self.c2[dofs[q]];
                g[q] = [s * g[q][0], s * g[q][1]];
            }
            sp.element_scatter_grad(t, &g, out);
        }
    }

    /// `(ox, oz) += D u` where `D u = diag(σ_x − σ_z, σ_z − σ_x) c² G u` couples
    /// the pressure into the auxiliary field.
    pub fn add_pml_coupling(&self, u: &[T], ox: &mut [T], oz: &mut [T], scratch: &mut [Vec<T>; 2]) {
        let sp = &*self.space;
        let [wx, wz] = scratch;
        wx.iter_mut().for_each(|v| *v = T::zero());
        wz.iter_mut().for_each(|v| *v = T::zero());
        sp.apply_weighted_grad(u, wx, wz);
        for d in 0..sp.n_dofs() {
            let a = (sp.sigma_x[d] - sp.sigma_z[d]) * self.c2[d];
            ox[d] += a * wx[d];
            oz[d] -= a * wz[d];
        }
    }

    /// `out += Dᵀ (μx, μz)`.
    pub fn add_pml_coupling_t(&self, mx: &[T], mz: &[T], out: &mut [T], scratch: &mut [Vec<T>; 2]) {
        let sp = &*self.space;
        let [sx, sz] = scratch;
        for d in 0..sp.n_dofs() {
            let a = (sp.sigma_x[d] - sp.sigma_z[d]) * self.c2[d];
            sx[d] = a * mx[d];
            sz[d] = -a * mz[d];
        }
        sp.apply_div_t(sx, sz, out);
    }
}

/// `K u` as a fresh vector.
pub fn apply_stiffness<T: Real>(fs: &FieldSetup<T>, u: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); u.len()];
    fs.apply_stiffness_into(u, &mut out);
    out
}

/// Compressed sparse rows of the assembled stiffness.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }
}

/// Assembled `K` with the same quadrature as the matrix-free kernel.
pub fn assemble_stiffness<T: Real>(fs: &FieldSetup<T>) -> CsrMatrix {
    let sp = &*fs.space;
    let n = sp.nodes_per_element();
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); sp.n_dofs()];
    let mut phys = vec![[0.0f64; 2]; n * n];
    for t in 0..sp.n_elements() {
        let dofs = sp.dofmap.element_dofs(t);
        let geo = &sp.geometry[t];
        let m = geo.jinv_t.map(|r| r.map(|v| v.as_f64()));
        for (k, g) in sp.grad_ref.iter().enumerate() {
            phys[k] = to_phys(&m, [g[0].as_f64(), g[1].as_f64()]);
        }
        for q in 0..n {
            let s = sp.weights[q].as_f64() * geo.det.as_f64() * fs.c2[dofs[q]].as_f64();
            for i in 0..n {
                let gi = phys[q * n + i];
                for j in 0..n {
                    let gj = phys[q * n + j];
                    *rows[dofs[i]].entry(dofs[j]).or_insert(0.0) += s * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
            }
        }
    }
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut values = Vec::new();
    for r in rows {
        for (j, v) in r {
            cols.push(j);
            values.push(v);
        }
        row_ptr.push(cols.len());
    }
    CsrMatrix { row_ptr, cols, values }
}

/// Dense mass matrix assembled with each element's own quadrature rule.
pub fn assemble_dense_mass<T: Real>(sp: &Space<T>) -> Vec<Vec<f64>> {
    let nd = sp.n_dofs();
    let tab = sp.element.nodal_tabulation();
    let mut m = vec![vec![0.0; nd]; nd];
    for t in 0..sp.n_elements() {
        let dofs = sp.dofmap.element_dofs(t);
        let det = sp.geometry[t].det.as_f64();
        for (q, row) in tab.iter().enumerate() {
            let w = sp.element.weights[q] * det;
            for (i, &pi) in row.iter().enumerate() {
                for (j, &pj) in row.iter().enumerate() {
                    m[dofs[i]][dofs[j]] += w * pi * pj;
                }
            }
        }
    }
    m
}
