//! Manufactured-solution convergence study with the absorbing layer active.
//!
//! The exact pressure is `u = t² sin x sin z`. The auxiliary field solves
//! `p_k' + σ_k p_k = −a_k c² ∂_k u` with `a = (σ_x − σ_z, σ_z − σ_x)`, so
//! `p_k = −a_k c² ∂_k(sin x sin z) I(t; σ_k)` with `I(t; σ) = ∫₀ᵗ e^{−σ(t−s)} s² ds`.
//! The load is the weak residual of the exact fields in the semi-discrete
//! system, so boundary fluxes are carried by the forcing.

use std::fmt;
use std::sync::Arc;

use crate::discretization::{FieldSetup, PmlSpec, Space};
use crate::error::Result;
use crate::io::{MeshKind, RunConfig};
use crate::mesh::{structured_mesh, BoundaryTag, Region};
use crate::propagator::Stepper;

use super::{boundary_kinds, domain_of};

/// Unit square with a 250 m layer on every side, uniform 1.43 km/s.
pub fn preset() -> RunConfig {
    RunConfig {
        pml_width: 0.25,
        pml_top_width: 0.25,
        top: BoundaryTag::Absorbing,
        mesh_kind: MeshKind::Structured,
        background: 1.43,
        ..RunConfig::default()
    }
}

/// `∫₀ᵗ e^{−σ(t−s)} s² ds`.
pub fn memory_integral(t: f64, sigma: f64) -> f64 {
    let x = sigma * t;
    if x < 0.5 {
        // Σ (−σ)^k t^{k+3} 2 / ((k+1)(k+2)(k+3))
        let mut sum = 0.0;
        let mut term = t.powi(3);
        for k in 0..30 {
            let kf = k as f64;
            sum += term * 2.0 / ((kf + 1.0) * (kf + 2.0) * (kf + 3.0));
            term *= -sigma * t / (kf + 1.0);
        }
        sum
    } else {
        let s3 = sigma.powi(3);
        t * t / sigma - 2.0 * t / (sigma * sigma) + 2.0 / s3 - 2.0 * (-x).exp() / s3
    }
}

#[derive(Debug, Clone)]
pub struct MmsRow {
    pub degree: u32,
    pub h: f64,
    pub n_dofs: usize,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct MmsReport {
    pub dt: f64,
    pub duration: f64,
    pub rows: Vec<MmsRow>,
}

impl MmsReport {
    /// Observed orders `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for one degree.
    pub fn orders(&self, degree: u32) -> Vec<f64> {
        let rows: Vec<&MmsRow> = self.rows.iter().filter(|r| r.degree == degree).collect();
        rows.windows(2).map(|w| (w[0].rel_error / w[1].rel_error).ln() / (w[0].h / w[1].h).ln()).collect()
    }

    /// Error on the finest mesh of `degree`.
    pub fn finest_error(&self, degree: u32) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.degree == degree)
            .min_by(|a, b| a.h.total_cmp(&b.h))
            .map(|r| r.rel_error)
    }
}

impl fmt::Display for MmsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# dt {:e} T {}", self.dt, self.duration)?;
        writeln!(f, "degree h dofs rel_l2_error order")?;
        let mut degrees: Vec<u32> = self.rows.iter().map(|r| r.degree).collect();
        degrees.dedup();
        for d in degrees {
            let orders = self.orders(d);
            for (i, r) in self.rows.iter().filter(|r| r.degree == d).enumerate() {
                let o = if i == 0 { "-".to_string() } else { format!("{:.3}", orders[i - 1]) };
                writeln!(f, "{} {} {} {:.6e} {o}", r.degree, r.h, r.n_dofs, r.rel_error)?;
            }
        }
        Ok(())
    }
}

/// Runs every configured degree on every configured mesh size.
pub fn run(cfg: &RunConfig) -> Result<MmsReport> {
    let mut rows = vec![];
    for &degree in &cfg.mms_degrees {
        for &h in &cfg.mms_sizes {
            let (n_dofs, rel_error) = solve(cfg, degree, h)?;
            rows.push(MmsRow { degree, h, n_dofs, rel_error });
        }
    }
    Ok(MmsReport { dt: cfg.mms_dt, duration: cfg.mms_duration, rows })
}

/// Relative L² error in the physical rectangle at the final time.
pub fn solve(cfg: &RunConfig, degree: u32, h: f64) -> Result<(usize, f64)> {
    let domain = domain_of(cfg);
    let mesh = structured_mesh(&domain, h, boundary_kinds(cfg))?;
    let c = cfg.background;
    let space = Arc::new(Space::new(mesh, degree, PmlSpec::new(domain, c)?)?);
    let fs = FieldSetup::new(space.clone(), vec![c; space.n_dofs()])?;
    let nd = space.n_dofs();
    let c2 = c * c;
    let xy = &space.dofmap.coords;
    let s: Vec<f64> = xy.iter().map(|p| p[0].sin() * p[1].sin()).collect();
    let gx: Vec<f64> = xy.iter().map(|p| p[0].cos() * p[1].sin()).collect();
    let gz: Vec<f64> = xy.iter().map(|p| p[0].sin() * p[1].cos()).collect();
    let (sx, sz) = (&space.sigma_x, &space.sigma_z);

    let flux = |t: f64| -> [Vec<f64>; 2] {
        let px = (0..nd).map(|d| -(sx[d] - sz[d]) * c2 * gx[d] * memory_integral(t, sx[d])).collect();
        let pz = (0..nd).map(|d| -(sz[d] - sx[d]) * c2 * gz[d] * memory_integral(t, sz[d])).collect();
        [px, pz]
    };
    let load = |t: f64, out: &mut Vec<f64>| {
        let [px, pz] = flux(t);
        let vx: Vec<f64> = (0..nd).map(|d| c2 * t * t * gx[d] + px[d]).collect();
        let vz: Vec<f64> = (0..nd).map(|d| c2 * t * t * gz[d] + pz[d]).collect();
        for d in 0..nd {
            let (u, ut, utt) = (t * t * s[d], 2.0 * t * s[d], 2.0 * s[d]);
            out[d] = space.mass[d] * (utt + (sx[d] + sz[d]) * ut + sx[d] * sz[d] * u) + fs.boundary[d] * ut;
        }
        space.weak_divergence(&vx, &vz, out);
    };

    let dt = cfg.mms_dt;
    let n_steps = (cfg.mms_duration / dt + 1e-9).floor() as usize;
    let mut st = Stepper::new(&fs, dt);
    st.u = s.iter().map(|v| dt * dt * v).collect();
    st.p = flux(dt);
    let mut f = vec![0.0; nd];
    while st.n < n_steps {
        load(st.n as f64 * dt, &mut f);
        st.step(&f)?;
    }
    let t = st.n as f64 * dt;
    let (mut num, mut den) = (0.0, 0.0);
    for d in 0..nd {
        if space.dofmap.regions[d] == Region::Physical {
            let exact = t * t * s[d];
            num += space.mass[d] * (st.u[d] - exact).powi(2);
            den += space.mass[d] * exact * exact;
        }
    }
    Ok((nd, (num / den).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_integral_branches_agree() {
        for &(t, s) in &[(0.1, 4.99), (0.1, 5.01), (0.3, 1.0), (0.05, 0.0)] {
            // Simpson reference
            let n = 2000;
            let hh = t / n as f64;
            let f = |x: f64| (-s * (t - x)).exp() * x * x;
            let sum: f64 = (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * f(i as f64 * hh)
                })
                .sum();
            let reference = sum * hh / 3.0;
            assert!((memory_integral(t, s) - reference).abs() < 1e-12 * reference.max(1e-300), "{t} {s}");
        }
    }
}
