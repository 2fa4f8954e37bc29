//! Homogeneous grid-density sweep: receiver error against a fine reference
//! as a function of cells per wavelength `C`, per element degree.

use std::fmt;

use crate::discretization::{estimate_dt_cfl, FieldSetup};
use crate::error::{FwiError, Result};
use crate::grid::Grid2;
use crate::io::{MeshKind, RunConfig, VelocityModel};
use crate::mesh::{BoundaryTag, Mesh, Rect};
use crate::propagator::{forward, ShotRecord, Snapshots};

use super::{build_mesh, build_space, shots};

/// 1.43 km/s medium, 5 Hz source; the physical box spans 14 × 6 wavelengths
/// with the source two wavelengths from the left edge and an 11-receiver bin
/// centred ten wavelengths away.
pub fn preset() -> RunConfig {
    let c = 1.43;
    let f = 5.0;
    let lam = c / f;
    RunConfig {
        domain: Rect::new(0.0, 14.0 * lam, -6.0 * lam, 0.0),
        pml_width: lam,
        pml_top_width: lam,
        top: BoundaryTag::Absorbing,
        frequency: f,
        background: c,
        water_depth: 0.0,
        anomaly_radius: 0.0,
        sources: vec![[2.0 * lam, -3.0 * lam]],
        receiver_count: 11,
        receiver_x: [11.5 * lam, 12.5 * lam],
        receiver_z: -3.0 * lam,
        mesh_kind: MeshKind::Adapted,
        min_size: 1e-3,
        duration: 1.5 / f + 10.0 * lam / c + 2.0 / f,
        cfl_safety: 0.5,
        ..RunConfig::default()
    }
}

/// `sqrt(Σ_r ∫ (p_r − q_r)² / Σ_r ∫ q_r²) × 100` with trapezoidal time integration.
pub fn receiver_error<T: crate::Real>(p: &ShotRecord<T>, reference: &ShotRecord<T>) -> Result<f64> {
    if p.nt != reference.nt || p.n_receivers() != reference.n_receivers() {
        return Err(FwiError::invalid("records to compare differ in shape"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for n in 0..p.nt {
        let w = if n == 0 || n + 1 == p.nt { 0.5 } else { 1.0 };
        for r in 0..p.n_receivers() {
            let (a, b) = (p.at(n, r).as_f64(), reference.at(n, r).as_f64());
            num += w * (a - b).powi(2);
            den += w * b * b;
        }
    }
    Ok(100.0 * (num / den).sqrt())
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub degree: u32,
    pub c: f64,
    /// `α(P) · C` with `α(P) = sqrt(n_DoF / n_e)`.
    pub g: f64,
    pub n_dofs: usize,
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub dt: f64,
    pub reference_c: f64,
    pub reference_g: f64,
    pub target: f64,
    /// Grid points per degree, ascending in `C`.
    pub grid: Vec<SweepPoint>,
    /// Points added while bisecting.
    pub refinement: Vec<SweepPoint>,
    /// `(degree, C at the target error)`; `None` if the grid never crosses it.
    pub c_min: Vec<(u32, Option<f64>)>,
}

impl SweepReport {
    pub fn c_min_of(&self, degree: u32) -> Option<f64> {
        self.c_min.iter().find(|p| p.0 == degree).and_then(|p| p.1)
    }

    /// Errors on the coarse grid fall as `C` grows.
    pub fn monotone(&self, degree: u32) -> bool {
        let e: Vec<f64> = self.grid.iter().filter(|p| p.degree == degree).map(|p| p.error).collect();
        e.windows(2).all(|w| w[1] < w[0])
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# dt {:e} reference degree 3 C {:.4} G {:.3} target {}%", self.dt, self.reference_c, self.reference_g, self.target)?;
        writeln!(f, "degree C G dofs E_percent")?;
        let mut all: Vec<&SweepPoint> = self.grid.iter().chain(&self.refinement).collect();
        all.sort_by(|a, b| a.degree.cmp(&b.degree).then(a.c.total_cmp(&b.c)));
        for p in all {
            writeln!(f, "{} {:.4} {:.4} {} {:.6}", p.degree, p.c, p.g, p.n_dofs, p.error)?;
        }
        for (d, c) in &self.c_min {
            match c {
                Some(c) => writeln!(f, "# degree {d} C_min {c:.4}")?,
                None => writeln!(f, "# degree {d} C_min not bracketed")?,
            }
        }
        Ok(())
    }
}

struct Sweeper<'a> {
    cfg: &'a RunConfig,
    vm: VelocityModel,
    dt: f64,
    reference: ShotRecord<f64>,
}

impl Sweeper<'_> {
    fn mesh(cfg: &RunConfig, vm: &VelocityModel, c: f64) -> Result<Mesh> {
        build_mesh(&RunConfig { cells_per_wavelength: c, ..cfg.clone() }, vm)
    }

    fn record(cfg: &RunConfig, vm: &VelocityModel, degree: u32, c: f64, dt: f64) -> Result<(ShotRecord<f64>, usize, f64)> {
        let mesh = Self::mesh(cfg, vm, c)?;
        let n_el = mesh.n_triangles();
        let space = build_space(&RunConfig { degree, ..cfg.clone() }, mesh, cfg.background)?;
        let fs = FieldSetup::new(space.clone(), vec![cfg.background; space.n_dofs()])?;
        let limit = estimate_dt_cfl(&fs);
        if dt > limit {
            return Err(FwiError::invalid(format!("sweep step {dt:e} exceeds the CFL limit {limit:e} at degree {degree}, C = {c}")));
        }
        let shot = &shots(cfg, dt)[0];
        let (rec, _) = forward(&fs, shot, Snapshots::Discard)?;
        let g = (space.n_dofs() as f64 / n_el as f64).sqrt() * c;
        Ok((rec, space.n_dofs(), g))
    }

    fn point(&self, degree: u32, c: f64) -> Result<SweepPoint> {
        let (rec, n_dofs, g) = Self::record(self.cfg, &self.vm, degree, c, self.dt)?;
        Ok(SweepPoint { degree, c, g, n_dofs, error: receiver_error(&rec, &self.reference)? })
    }
}

/// `α(P)` measured on a mesh built at cells-per-wavelength `c`.
fn alpha(cfg: &RunConfig, vm: &VelocityModel, degree: u32, c: f64) -> Result<f64> {
    let mesh = Sweeper::mesh(cfg, vm, c)?;
    let n_el = mesh.n_triangles() as f64;
    let space = build_space(&RunConfig { degree, ..cfg.clone() }, mesh, cfg.background)?;
    Ok((space.n_dofs() as f64 / n_el).sqrt())
}

fn cfl_at(cfg: &RunConfig, vm: &VelocityModel, degree: u32, c: f64) -> Result<f64> {
    let mesh = Sweeper::mesh(cfg, vm, c)?;
    let space = build_space(&RunConfig { degree, ..cfg.clone() }, mesh, cfg.background)?;
    let fs = FieldSetup::new(space.clone(), vec![cfg.background; space.n_dofs()])?;
    Ok(estimate_dt_cfl(&fs))
}

/// Coarse scan of `C` per degree, then bisection on the bracket that crosses the target.
pub fn run(cfg: &RunConfig) -> Result<SweepReport> {
    let vm = VelocityModel::uniform(Grid2::covering(cfg.domain.x_min, cfg.domain.x_max, cfg.domain.z_min, cfg.domain.z_max, 0.1)?, cfg.background)?;
    // reference: degree 3 with G close to the configured value
    let mut ref_c = cfg.sweep_reference_g / 2.5;
    for _ in 0..3 {
        ref_c = cfg.sweep_reference_g / alpha(cfg, &vm, 3, ref_c)?;
    }
    // per degree, grid values kept clear of the reference resolution
    let mut plan: Vec<(u32, Vec<f64>)> = vec![];
    for &d in &cfg.sweep_degrees {
        let a = alpha(cfg, &vm, d, 3.0)?;
        let cs: Vec<f64> = cfg.sweep_c_values.iter().copied().filter(|&c| a * c <= 0.85 * cfg.sweep_reference_g).collect();
        plan.push((d, cs));
    }
    let mut dt = cfl_at(cfg, &vm, 3, ref_c)?;
    for (d, cs) in &plan {
        if let Some(&cmax) = cs.iter().max_by(|a, b| a.total_cmp(b)) {
            dt = dt.min(cfl_at(cfg, &vm, *d, cmax)?);
        }
    }
    let dt = cfg.dt.unwrap_or(cfg.cfl_safety * dt);
    let (reference, _, ref_g) = Sweeper::record(cfg, &vm, 3, ref_c, dt)?;
    let sw = Sweeper { cfg, vm, dt, reference };

    let target = cfg.sweep_target_error;
    let mut grid = vec![];
    let mut refinement = vec![];
    let mut c_min = vec![];
    for (d, cs) in &plan {
        let pts: Vec<SweepPoint> = cs.iter().map(|&c| sw.point(*d, c)).collect::<Result<_>>()?;
        let bracket = pts.windows(2).find(|w| w[0].error > target && w[1].error <= target).map(|w| (w[0].clone(), w[1].clone()));
        let found = match bracket {
            None => None,
            Some((mut lo, mut hi)) => {
                for _ in 0..cfg.sweep_bisections {
                    let mid = sw.point(*d, 0.5 * (lo.c + hi.c))?;
                    if mid.error > target {
                        lo = mid.clone();
                    } else {
                        hi = mid.clone();
                    }
                    refinement.push(mid);
                }
                // log-linear interpolation inside the final bracket
                let (la, lb, lt) = (lo.error.ln(), hi.error.ln(), target.ln());
                let t = if (la - lb).abs() > 0.0 { ((la - lt) / (la - lb)).clamp(0.0, 1.0) } else { 0.5 };
                Some(lo.c + t * (hi.c - lo.c))
            }
        };
        c_min.push((*d, found));
        grid.extend(pts);
    }
    Ok(SweepReport { dt, reference_c: ref_c, reference_g: ref_g, target, grid, refinement, c_min })
}
