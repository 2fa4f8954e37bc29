//! Directional-derivative check of the adjoint gradient against finite differences.

use std::fmt;

use crate::adjoint::{adjoint_directional, gradient_mask, misfit_and_gradient, total_misfit};
use crate::discretization::{interpolate_velocity, water_flags, FieldSetup, WATER_THRESHOLD};
use crate::error::{FwiError, Result};
use crate::io::{MeshKind, RunConfig};
use crate::mesh::BoundaryTag;
use crate::propagator::{forward, Snapshots};

use super::{build_mesh, build_space, shots, start_model, true_model};

/// Two-layer setup: 4 km/s over 1 km/s in a 1 km square, 5 Hz source near
/// the top, 100 receivers at 900 m depth, 20 m degree-2 cells, 0.5 ms steps.
pub fn preset() -> RunConfig {
    RunConfig {
        pml_width: 0.2,
        top: BoundaryTag::Absorbing,
        degree: 2,
        frequency: 5.0,
        sources: vec![[0.5, -0.1]],
        receiver_count: 100,
        receiver_x: [0.005, 0.995],
        receiver_z: -0.9,
        mesh_kind: MeshKind::Structured,
        mesh_h: 0.02,
        duration: 1.0,
        dt: Some(5e-4),
        subsample: 1,
        background: 4.0,
        water_depth: 0.0,
        anomaly_radius: 0.0,
        layer_z: Some(-0.5),
        layer_velocity: 1.0,
        start_velocity: 4.0,
        ..RunConfig::default()
    }
}

#[derive(Debug, Clone)]
pub struct FdRow {
    pub step: f64,
    pub d_fd: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub n_dofs: usize,
    pub dt: f64,
    pub misfit: f64,
    pub d_co: f64,
    pub rows: Vec<FdRow>,
}

impl GradCheckReport {
    /// Finite-difference values move in one direction as the step shrinks.
    pub fn monotone(&self) -> bool {
        let d: Vec<f64> = self.rows.windows(2).map(|w| w[1].d_fd - w[0].d_fd).collect();
        d.iter().all(|&v| v > 0.0) || d.iter().all(|&v| v < 0.0)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# dofs {} dt {:e} J {:.10e}", self.n_dofs, self.dt, self.misfit)?;
        writeln!(f, "# d_co {:.10e}", self.d_co)?;
        writeln!(f, "h d_fd rel_diff")?;
        for r in &self.rows {
            writeln!(f, "{:e} {:.10e} {:.4e}", r.step, r.d_fd, r.rel_diff)?;
        }
        Ok(())
    }
}

/// Gradient at the start model in the direction `G / max|G|`, compared with
/// one-sided differences `(J(c + h c̃) − J(c)) / h`.
pub fn run(cfg: &RunConfig) -> Result<GradCheckReport> {
    let truth_vm = true_model(cfg)?;
    let start_vm = start_model(cfg)?;
    let mesh = build_mesh(cfg, &start_vm)?;
    let space = build_space(cfg, mesh, start_vm.max())?;
    let dt = cfg.dt.ok_or_else(|| FwiError::invalid("the gradient check needs a fixed time.dt"))?;
    let truth = FieldSetup::new(space.clone(), interpolate_velocity(&truth_vm, &space.dofmap))?;
    let start = FieldSetup::new(space.clone(), interpolate_velocity(&start_vm, &space.dofmap))?;
    let shots = shots(cfg, dt);
    let observed = shots.iter().map(|s| forward(&truth, s, Snapshots::Discard).map(|r| r.0)).collect::<Result<Vec<_>>>()?;
    let mask = gradient_mask(&start, &water_flags(&start.c, WATER_THRESHOLD));
    let ev = misfit_and_gradient(&start, &shots, &observed, &mask)?;
    let gmax = ev.gradient.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if gmax == 0.0 {
        return Err(FwiError::invalid("gradient vanishes; nothing to check"));
    }
    let dir: Vec<f64> = ev.gradient.values.iter().map(|v| v / gmax).collect();
    let d_co = adjoint_directional(&ev.gradient, &dir, &space.mass);
    let mut rows = vec![];
    for &h in &cfg.gradcheck_steps {
        let c: Vec<f64> = start.c.iter().zip(&dir).map(|(c, d)| c + h * d).collect();
        let j = total_misfit(&start.with_velocity(c)?, &shots, &observed)?;
        let d_fd = (j - ev.misfit) / h;
        rows.push(FdRow { step: h, d_fd, rel_diff: ((d_co - d_fd) / d_fd).abs() });
    }
    Ok(GradCheckReport { n_dofs: space.n_dofs(), dt, misfit: ev.misfit, d_co, rows })
}
