//! End-to-end toy inversion: synthetic data from a model with a circular
//! anomaly, inverted from the anomaly-free model on the same mesh.

use std::sync::Arc;

use crate::adjoint::{gradient_mask, misfit_and_gradient};
use crate::discretization::{interpolate_velocity, water_flags, FieldSetup, PointInterpolator, Space, WATER_THRESHOLD};
use crate::error::Result;
use crate::grid::Grid2;
use crate::inversion::{invert, InversionOptions, InversionState, IterationRecord, Objective, WolfeParams};
use crate::io::{RunConfig, VelocityModel};
use crate::propagator::{forward, ShotConfig, ShotRecord, Snapshots};

use super::{build_mesh, build_space, choose_dt, shots, start_model, true_model};

/// Multi-shot misfit with the mass-weighted inner product.
pub struct FwiObjective {
    pub space: Arc<Space<f64>>,
    pub shots: Vec<ShotConfig>,
    pub observed: Vec<ShotRecord<f64>>,
    pub mask: Vec<bool>,
    pub evaluations: usize,
}

impl Objective<f64> for FwiObjective {
    fn evaluate(&mut self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluations += 1;
        let fs = FieldSetup::new(self.space.clone(), c.to_vec())?;
        let ev = misfit_and_gradient(&fs, &self.shots, &self.observed, &self.mask)?;
        Ok((ev.misfit, ev.gradient.values))
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.space.mass).map(|((x, y), m)| x * y * m).sum()
    }
}

pub struct FwiOutcome {
    pub space: Arc<Space<f64>>,
    pub dt: f64,
    pub c_true: Vec<f64>,
    pub c_start: Vec<f64>,
    pub state: InversionState<f64>,
    pub mask: Vec<bool>,
    pub evaluations: usize,
}

impl FwiOutcome {
    pub fn initial_misfit(&self) -> f64 {
        self.state.history[0]
    }

    pub fn final_misfit(&self) -> f64 {
        *self.state.history.last().expect("history holds the start misfit")
    }

    /// Velocity of `c` at a point, by the finite-element interpolant.
    pub fn velocity_at(&self, c: &[f64], p: [f64; 2]) -> Result<f64> {
        Ok(PointInterpolator::new(&self.space, &[p])?.eval(c)[0])
    }

    /// Masked DoFs hold their start values bit for bit.
    pub fn masked_unchanged(&self) -> bool {
        self.mask.iter().enumerate().filter(|p| *p.1).all(|(d, _)| self.state.c[d].to_bits() == self.c_start[d].to_bits())
    }

    /// Samples the recovered field on a raster over the physical rectangle.
    pub fn raster(&self, h: f64) -> Result<VelocityModel> {
        let r = &self.space.pml.domain.physical;
        let g = Grid2::covering(r.x_min, r.x_max, r.z_min, r.z_max, h)?;
        let pts: Vec<[f64; 2]> = (0..g.nz).flat_map(|j| (0..g.nx).map(move |i| (i, j))).map(|(i, j)| g.coord(i, j)).collect();
        let values = PointInterpolator::new(&self.space, &pts)?.eval(&self.state.c);
        VelocityModel::new(g, values)
    }
}

pub fn options(cfg: &RunConfig) -> InversionOptions {
    InversionOptions {
        iter_max: cfg.iter_max,
        tol: cfg.tol,
        lower: cfg.lower,
        upper: cfg.upper,
        memory: cfg.memory,
        wolfe: WolfeParams::default(),
        first_step: cfg.first_step,
        max_failures: 5,
    }
}

/// Builds the problem and runs projected L-BFGS, reporting each accepted iteration.
pub fn run(cfg: &RunConfig, on_iter: impl FnMut(&IterationRecord)) -> Result<FwiOutcome> {
    let truth_vm = true_model(cfg)?;
    let start_vm = start_model(cfg)?;
    let mesh = build_mesh(cfg, &start_vm)?;
    let space = build_space(cfg, mesh, start_vm.max())?;
    let dt = choose_dt(cfg, &space, cfg.upper)?;
    let c_true: Vec<f64> = interpolate_velocity(&truth_vm, &space.dofmap);
    let c_start: Vec<f64> = interpolate_velocity(&start_vm, &space.dofmap);
    let truth = FieldSetup::new(space.clone(), c_true.clone())?;
    let shots = shots(cfg, dt);
    for s in &shots {
        s.validate(&space.pml.domain)?;
    }
    let observed = shots.iter().map(|s| forward(&truth, s, Snapshots::Discard).map(|r| r.0)).collect::<Result<Vec<_>>>()?;
    let start = FieldSetup::new(space.clone(), c_start.clone())?;
    let mask = gradient_mask(&start, &water_flags(&c_start, WATER_THRESHOLD));
    let mut obj = FwiObjective { space: space.clone(), shots, observed, mask: mask.clone(), evaluations: 0 };
    let state = invert(&mut obj, c_start.clone(), &options(cfg), on_iter)?;
    Ok(FwiOutcome { space, dt, c_true, c_start, state, mask, evaluations: obj.evaluations })
}
