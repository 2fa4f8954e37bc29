//! Misfit, discrete adjoint of the leapfrog scheme and the wavespeed gradient.
//!
//! The adjoint is the exact transpose of the forward recursion, so the
//! gradient is the derivative of the discrete misfit. With `λ_n, μ_n` the
//! multipliers of the `u` and `p` updates producing step `n + 1`, the
//! backward sweep for `m = N, …, 2` is
//!
//! ```text
//! M_u⁺ λ_{m−1} = (2M/Δt² − M_r − K) λ_m − M_u⁻ λ_{m+1} − Dᵀ μ_m − Hᵀ(H u^m − d^m)
//! M_p⁺ μ_{m−1} = M_p⁻ μ_{m+1} − G λ_m
//! ```
//!
//! and `dJ/dc_g = Σ_n [2 c_g Σ_{q=g} w_q |J| ∇λ_n·∇u^n + λ_{n,g} b_g (u^{n+1} − u^{n−1})_g / 2Δt]`
//! plus, inside the absorbing layer, `2 c_g (σ_x − σ_z)_g (μ_x w_x − μ_z w_z)_g`
//! where `(w_x, w_z) = G u^n`.

use rayon::prelude::*;

use crate::discretization::{FieldSetup, PointInterpolator};
use crate::error::{FwiError, Result};
use crate::mesh::Region;
use crate::propagator::{boundary_dofs, forward_with, ShotConfig, ShotRecord, Snapshots, StateSnapshots, StepCoefficients};
use crate::scalar::Real;

/// `J = ½ Σ_r Σ_n (sim − obs)²` (plain sums, no time weighting) and the residual record.
pub fn misfit<T: Real>(sim: &ShotRecord<T>, obs: &ShotRecord<T>) -> Result<(f64, ShotRecord<T>)> {
    if sim.nt != obs.nt || sim.n_receivers() != obs.n_receivers() {
        return Err(FwiError::invalid(format!(
            "record shapes differ: {}×{} vs {}×{}",
            sim.nt,
            sim.n_receivers(),
            obs.nt,
            obs.n_receivers()
        )));
    }
    if (sim.dt - obs.dt).abs() > 1e-12 * sim.dt {
        return Err(FwiError::invalid(format!("record time steps differ: {} vs {}", sim.dt, obs.dt)));
    }
    let mut res = sim.clone();
    let mut j = 0.0;
    for (r, &o) in res.data.iter_mut().zip(&obs.data) {
        *r -= o;
        j += r.as_f64().powi(2);
    }
    Ok((0.5 * j, res))
}

/// Nodal gradient with masked DoFs held at exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    pub values: Vec<T>,
    /// `true` where the gradient is suppressed (absorbing layer or water).
    pub mask: Vec<bool>,
}

/// Mask of DoFs outside the physical rectangle or flagged as water.
pub fn gradient_mask<T: Real>(fs: &FieldSetup<T>, water: &[bool]) -> Vec<bool> {
    fs.space.dofmap.regions.iter().zip(water).map(|(&r, &w)| r == Region::Pml || w).collect()
}

/// Riesz map of the accumulated right side: `G = rhs / M_u`, masked.
pub fn riesz<T: Real>(fs: &FieldSetup<T>, rhs: &[T], mask: &[bool]) -> GradientField<T> {
    let values = rhs
        .iter()
        .zip(&fs.space.mass)
        .zip(mask)
        .map(|((&r, &m), &k)| if k { T::zero() } else { r / m })
        .collect();
    GradientField { values, mask: mask.to_vec() }
}

/// `d^co = c̃ᵀ M G` over unmasked DoFs.
pub fn adjoint_directional<T: Real>(g: &GradientField<T>, direction: &[T], mass: &[T]) -> f64 {
    (0..g.values.len())
        .filter(|&d| !g.mask[d])
        .map(|d| (direction[d] * mass[d] * g.values[d]).as_f64())
        .sum()
}

/// Forward difference `(J(c + h c̃) − J(c)) / h`; pass `j0` to reuse a known baseline.
pub fn fd_directional<T: Real>(
    mut j: impl FnMut(&[T]) -> Result<f64>,
    c: &[T],
    direction: &[T],
    h: f64,
    j0: Option<f64>,
) -> Result<f64> {
    let base = match j0 {
        Some(v) => v,
        None => j(c)?,
    };
    let hh = T::lit(h);
    let shifted: Vec<T> = c.iter().zip(direction).map(|(&a, &d)| a + hh * d).collect();
    Ok((j(&shifted)? - base) / h)
}

/// Backward sweep state.
struct AdjointSweep<'a, T: Real> {
    fs: &'a FieldSetup<T>,
    coef: StepCoefficients<T>,
    lam: [Vec<T>; 3],
    mu: [[Vec<T>; 2]; 3],
    scratch: [Vec<T>; 2],
    acc: Vec<T>,
}

impl<'a, T: Real> AdjointSweep<'a, T> {
    fn new(fs: &'a FieldSetup<T>, dt: f64) -> Self {
        let n = fs.n_dofs();
        let z = || vec![T::zero(); n];
        AdjointSweep {
            fs,
            coef: StepCoefficients::new(fs, dt),
            lam: [z(), z(), z()],
            mu: [[z(), z()], [z(), z()], [z(), z()]],
            scratch: [z(), z()],
            acc: z(),
        }
    }

    /// Given `λ_{m+1} = lam[0]`, `λ_m = lam[1]` and the forcing `Hᵀ r^m`,
    /// computes `λ_{m−1}` and rotates so that `lam[1]` holds it.
    fn step(&mut self, forcing: &[T]) {
        let fs = self.fs;
        let sp = &*fs.space;
        let nd = sp.n_dofs();
        let c = &self.coef;
        let has_pml = !sp.pml_elements.is_empty();
        let [next_l, cur_l, new_l] = &mut self.lam;
        // λ_{m−1}
        self.acc.iter_mut().for_each(|v| *v = T::zero());
        fs.add_stiffness(cur_l, &mut self.acc);
        if has_pml {
            let [cur_mx, cur_mz] = &self.mu[1];
            fs.add_pml_coupling_t(cur_mx, cur_mz, &mut self.acc, &mut self.scratch);
        }
        for d in 0..nd {
            new_l[d] = (c.s_diag[d] * cur_l[d] - self.acc[d] - c.mu_minus[d] * next_l[d] - forcing[d]) * c.inv_mu_plus[d];
        }
        // μ_{m−1}
        if has_pml {
            let [wx, wz] = &mut self.scratch;
            wx.iter_mut().for_each(|v| *v = T::zero());
            wz.iter_mut().for_each(|v| *v = T::zero());
            sp.apply_weighted_grad(cur_l, wx, wz);
            let w = [&*wx, &*wz];
            for k in 0..2 {
                for d in 0..nd {
                    let v = (c.mp_minus[k][d] * self.mu[0][k][d] - w[k][d]) * c.inv_mp_plus[k][d];
                    self.mu[2][k][d] = v;
                }
            }
            self.mu.rotate_left(1);
        }
        self.lam.rotate_left(1);
    }

    fn current(&self) -> &[T] {
        &self.lam[1]
    }

    fn current_flux(&self) -> &[Vec<T>; 2] {
        &self.mu[1]
    }
}

/// Adjoint multipliers kept at the forward snapshot steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointStates<T> {
    pub subsample: usize,
    pub steps: Vec<usize>,
    /// `λ_n`, paired with the pressure update.
    pub lambda: Vec<Vec<T>>,
    /// `μ_n`, paired with the auxiliary-field update.
    pub flux: Vec<[Vec<T>; 2]>,
}

/// Adjoint multipliers at the forward snapshot steps, in increasing time order.
pub fn adjoint<T: Real>(fs: &FieldSetup<T>, shot: &ShotConfig, residual: &ShotRecord<T>) -> Result<AdjointStates<T>> {
    let rec = PointInterpolator::new(&fs.space, &shot.receivers)?;
    let mut out = AdjointStates { subsample: shot.subsample, steps: vec![], lambda: vec![], flux: vec![] };
    sweep(fs, shot, &rec, residual, |n, lam, mu| {
        out.steps.push(n);
        out.lambda.push(lam.to_vec());
        out.flux.push(mu.clone());
    })?;
    out.steps.reverse();
    out.lambda.reverse();
    out.flux.reverse();
    Ok(out)
}

/// Runs the backward sweep, calling `visit(n, λ_n, μ_n)` at every step `n ≡ 0 (mod r)`,
/// including the trivially zero `n = 0` and `n = N`.
fn sweep<T: Real>(
    fs: &FieldSetup<T>,
    shot: &ShotConfig,
    rec: &PointInterpolator,
    residual: &ShotRecord<T>,
    mut visit: impl FnMut(usize, &[T], &[Vec<T>; 2]),
) -> Result<()> {
    let nt = shot.n_steps();
    if residual.nt != nt || residual.n_receivers() != rec.len() {
        return Err(FwiError::invalid("residual record does not match the shot"));
    }
    let r = shot.subsample;
    let n_last = nt - 1;
    let nd = fs.n_dofs();
    let zero = vec![T::zero(); nd];
    let zero_flux = [zero.clone(), zero.clone()];
    if n_last % r == 0 {
        visit(n_last, &zero, &zero_flux);
    }
    let mut sw = AdjointSweep::new(fs, shot.dt);
    let mut forcing = vec![T::zero(); nd];
    for m in (2..=n_last).rev() {
        forcing.iter_mut().for_each(|v| *v = T::zero());
        rec.scatter_add(residual.step(m), &mut forcing);
        sw.step(&forcing);
        let n = m - 1;
        if n % 16 == 0 && !sw.current().iter().all(|v| v.is_finite()) {
            return Err(FwiError::Unstable { step: n });
        }
        if n % r == 0 {
            visit(n, sw.current(), sw.current_flux());
        }
    }
    visit(0, &zero, &zero_flux);
    Ok(())
}

/// Running sums of the gradient integrands.
struct Accumulator<'a, T: Real> {
    fs: &'a FieldSetup<T>,
    bdofs: Vec<usize>,
    grad_sum: Vec<T>,
    flux_sum: Vec<T>,
    rhs: Vec<T>,
    w: [Vec<T>; 2],
}

impl<'a, T: Real> Accumulator<'a, T> {
    fn new(fs: &'a FieldSetup<T>) -> Self {
        let nd = fs.n_dofs();
        let z = || vec![T::zero(); nd];
        Accumulator { fs, bdofs: boundary_dofs(fs), grad_sum: z(), flux_sum: z(), rhs: z(), w: [z(), z()] }
    }

    fn add(&mut self, u: &[T], rate: &[T], lam: &[T], mu: &[Vec<T>; 2]) {
        let sp = &*self.fs.space;
        sp.accumulate_grad_product(lam, u, &mut self.grad_sum);
        for (k, &d) in self.bdofs.iter().enumerate() {
            self.rhs[d] += lam[d] * sp.boundary_weight[d] * rate[k];
        }
        if !sp.pml_elements.is_empty() {
            let [wx, wz] = &mut self.w;
            wx.iter_mut().for_each(|v| *v = T::zero());
            wz.iter_mut().for_each(|v| *v = T::zero());
            sp.apply_weighted_grad(u, wx, wz);
            for d in 0..self.flux_sum.len() {
                self.flux_sum[d] += mu[0][d] * wx[d] - mu[1][d] * wz[d];
            }
        }
    }

    /// Right side `M G`, scaled by the subsampling ratio.
    fn finish(mut self, r: usize) -> Vec<T> {
        let sp = &*self.fs.space;
        let two = T::lit(2.0);
        let rr = T::lit(r as f64);
        for d in 0..self.rhs.len() {
            let c = self.fs.c[d];
            let pml = (sp.sigma_x[d] - sp.sigma_z[d]) * self.flux_sum[d];
            self.rhs[d] = rr * (self.rhs[d] + two * c * (self.grad_sum[d] + pml));
        }
        self.rhs
    }
}

/// Masked gradient from stored forward and adjoint states.
pub fn gradient<T: Real>(
    fs: &FieldSetup<T>,
    fwd: &StateSnapshots<T>,
    adj: &AdjointStates<T>,
    mask: &[bool],
) -> Result<GradientField<T>> {
    if fwd.steps != adj.steps {
        return Err(FwiError::invalid("forward and adjoint snapshots are taken at different steps"));
    }
    let mut acc = Accumulator::new(fs);
    for k in 0..fwd.steps.len() {
        acc.add(&fwd.states[k], &fwd.boundary_rate[k], &adj.lambda[k], &adj.flux[k]);
    }
    Ok(riesz(fs, &acc.finish(fwd.subsample), mask))
}

/// Streams the adjoint sweep against the forward snapshots and returns the
/// unmasked gradient right side (`M G` before masking).
pub fn gradient_rhs<T: Real>(
    fs: &FieldSetup<T>,
    shot: &ShotConfig,
    fwd: &StateSnapshots<T>,
    residual: &ShotRecord<T>,
) -> Result<Vec<T>> {
    let rec = PointInterpolator::new(&fs.space, &shot.receivers)?;
    gradient_rhs_with(fs, shot, &rec, fwd, residual)
}

fn gradient_rhs_with<T: Real>(
    fs: &FieldSetup<T>,
    shot: &ShotConfig,
    rec: &PointInterpolator,
    fwd: &StateSnapshots<T>,
    residual: &ShotRecord<T>,
) -> Result<Vec<T>> {
    let mut acc = Accumulator::new(fs);
    let mut k = fwd.steps.len();
    let mut mismatch = false;
    sweep(fs, shot, rec, residual, |n, lam, mu| {
        if k == 0 || fwd.steps[k - 1] != n {
            mismatch = true;
            return;
        }
        k -= 1;
        acc.add(&fwd.states[k], &fwd.boundary_rate[k], lam, mu);
    })?;
    if mismatch || k != 0 {
        return Err(FwiError::invalid("forward snapshots do not match the shot's subsampling"));
    }
    Ok(acc.finish(shot.subsample))
}

/// Misfit and gradient summed over shots.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub misfit: f64,
    pub per_shot: Vec<f64>,
    pub gradient: GradientField<T>,
}

/// Misfit of every shot, evaluated in parallel and summed in shot order.
pub fn total_misfit<T: Real>(fs: &FieldSetup<T>, shots: &[ShotConfig], observed: &[ShotRecord<T>]) -> Result<f64> {
    if shots.len() != observed.len() {
        return Err(FwiError::invalid("one observed record is needed per shot"));
    }
    let per: Vec<Result<f64>> = shots
        .par_iter()
        .zip(observed.par_iter())
        .map(|(shot, obs)| {
            let src = PointInterpolator::new(&fs.space, &[shot.source])?;
            let rec = PointInterpolator::new(&fs.space, &shot.receivers)?;
            let (sim, _) = forward_with(fs, shot, &src, &rec, Snapshots::Discard)?;
            Ok(misfit(&sim, obs)?.0)
        })
        .collect();
    let mut j = 0.0;
    for v in per {
        j += v?;
    }
    Ok(j)
}

/// Misfit and masked gradient over all shots; shots run in parallel and are
/// reduced in order, so the result does not depend on the thread count.
pub fn misfit_and_gradient<T: Real>(
    fs: &FieldSetup<T>,
    shots: &[ShotConfig],
    observed: &[ShotRecord<T>],
    mask: &[bool],
) -> Result<Evaluation<T>> {
    if shots.len() != observed.len() {
        return Err(FwiError::invalid("one observed record is needed per shot"));
    }
    let per: Vec<Result<(f64, Vec<T>)>> = shots
        .par_iter()
        .zip(observed.par_iter())
        .map(|(shot, obs)| {
            shot.validate(&fs.space.pml.domain)?;
            let src = PointInterpolator::new(&fs.space, &[shot.source])?;
            let rec = PointInterpolator::new(&fs.space, &shot.receivers)?;
            let (sim, snaps) = forward_with(fs, shot, &src, &rec, Snapshots::Keep)?;
            let (j, res) = misfit(&sim, obs)?;
            let rhs = gradient_rhs_with(fs, shot, &rec, &snaps.expect("snapshots kept"), &res)?;
            Ok((j, rhs))
        })
        .collect();
    let nd = fs.n_dofs();
    let mut total = vec![T::zero(); nd];
    let mut per_shot = Vec::with_capacity(shots.len());
    for v in per {
        let (j, rhs) = v?;
        per_shot.push(j);
        for (t, r) in total.iter_mut().zip(&rhs) {
            *t += *r;
        }
    }
    Ok(Evaluation { misfit: per_shot.iter().sum(), per_shot, gradient: riesz(fs, &total, mask) })
}

/// One leapfrog step as a linear map on `(u^{n−1}, u^n, p^{n−1}, p^n)` without load.
pub fn step_map<T: Real>(fs: &FieldSetup<T>, dt: f64, x: &StepState<T>) -> StepState<T> {
    let c = StepCoefficients::new(fs, dt);
    let sp = &*fs.space;
    let nd = sp.n_dofs();
    let mut acc = vec![T::zero(); nd];
    fs.add_stiffness(&x.u1, &mut acc);
    sp.apply_div_t(&x.p1[0], &x.p1[1], &mut acc);
    let u2: Vec<T> = (0..nd).map(|d| (c.s_diag[d] * x.u1[d] - c.mu_minus[d] * x.u0[d] - acc[d]) * c.inv_mu_plus[d]).collect();
    let (mut dx, mut dz) = (vec![T::zero(); nd], vec![T::zero(); nd]);
    let mut scratch = [vec![T::zero(); nd], vec![T::zero(); nd]];
    fs.add_pml_coupling(&x.u1, &mut dx, &mut dz, &mut scratch);
    let dd = [dx, dz];
    let p2 = [0, 1].map(|k| (0..nd).map(|d| (c.mp_minus[k][d] * x.p0[k][d] - dd[k][d]) * c.inv_mp_plus[k][d]).collect());
    StepState { u0: x.u1.clone(), u1: u2, p0: x.p1.clone(), p1: p2 }
}

/// Transpose of [`step_map`], assembled from the same primitives the adjoint sweep uses.
pub fn step_map_transpose<T: Real>(fs: &FieldSetup<T>, dt: f64, y: &StepState<T>) -> StepState<T> {
    let c = StepCoefficients::new(fs, dt);
    let sp = &*fs.space;
    let nd = sp.n_dofs();
    // y = (y_u0, y_u1, y_p0, y_p1) pairs with (u^n, u^{n+1}, p^n, p^{n+1})
    let z: Vec<T> = (0..nd).map(|d| y.u1[d] * c.inv_mu_plus[d]).collect();
    let w = [0, 1].map(|k| (0..nd).map(|d| y.p1[k][d] * c.inv_mp_plus[k][d]).collect::<Vec<T>>());
    let u0 = (0..nd).map(|d| -c.mu_minus[d] * z[d]).collect();
    let mut kz = vec![T::zero(); nd];
    fs.add_stiffness(&z, &mut kz);
    let mut scratch = [vec![T::zero(); nd], vec![T::zero(); nd]];
    let mut dtw = vec![T::zero(); nd];
    fs.add_pml_coupling_t(&w[0], &w[1], &mut dtw, &mut scratch);
    let u1 = (0..nd).map(|d| y.u0[d] + c.s_diag[d] * z[d] - kz[d] - dtw[d]).collect();
    let p0 = [0, 1].map(|k| (0..nd).map(|d| c.mp_minus[k][d] * w[k][d]).collect());
    let (mut gx, mut gz) = (vec![T::zero(); nd], vec![T::zero(); nd]);
    sp.apply_weighted_grad(&z, &mut gx, &mut gz);
    let p1 = [(0, gx), (1, gz)].map(|(k, g)| (0..nd).map(|d| y.p0[k][d] - g[d]).collect());
    StepState { u0, u1, p0, p1 }
}

/// Two consecutive pressure and flux states.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState<T> {
    pub u0: Vec<T>,
    pub u1: Vec<T>,
    pub p0: [Vec<T>; 2],
    pub p1: [Vec<T>; 2],
}

impl<T: Real> StepState<T> {
    pub fn dot(&self, other: &Self) -> f64 {
        let d = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| (x * y).as_f64()).sum::<f64>();
        d(&self.u0, &other.u0)
            + d(&self.u1, &other.u1)
            + d(&self.p0[0], &other.p0[0])
            + d(&self.p0[1], &other.p0[1])
            + d(&self.p1[0], &other.p1[0])
            + d(&self.p1[1], &other.p1[1])
    }
}
