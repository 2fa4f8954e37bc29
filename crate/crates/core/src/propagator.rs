//! Explicit leapfrog integration of the damped wave system with an auxiliary
//! flux field in the absorbing layer.
//!
//! With lumped mass `M`, stiffness `K`, boundary damping `B` and the layer
//! terms `M_d = M(σ_x+σ_z)`, `M_r = M σ_x σ_z`, one step reads
//!
//! ```text
//! (M/Δt² + (M_d+B)/2Δt) u⁺ = (2M/Δt² − M_r − K) u − (M/Δt² − (M_d+B)/2Δt) u⁻ − Gᵀp + f
//! (M/2Δt + M σ_k/2) p_k⁺   = (M/2Δt − M σ_k/2) p_k⁻ − (D u)_k
//! ```
//!
//! where `p` is advanced two steps at a time with its damping averaged over
//! `p⁺` and `p⁻`. Every matrix on the left is diagonal.

use std::f64::consts::PI;

use crate::discretization::{FieldSetup, PointInterpolator};
use crate::error::{FwiError, Result};
use crate::mesh::{Domain, Region};
use crate::scalar::Real;

/// Ricker wavelet with peak frequency `f` (Hz), delayed by `1.5 / f`.
pub fn ricker(f: f64, t: f64) -> f64 {
    let a = (PI * f * (t - 1.5 / f)).powi(2);
    (1.0 - 2.0 * a) * (-a).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotConfig {
    pub source: [f64; 2],
    /// Ricker peak frequency (Hz).
    pub frequency: f64,
    pub amplitude: f64,
    pub receivers: Vec<[f64; 2]>,
    /// Duration `T` (s).
    pub duration: f64,
    /// Time step `Δt` (s).
    pub dt: f64,
    /// Keep the forward state every `subsample` steps.
    pub subsample: usize,
}

impl ShotConfig {
    /// `floor(T / Δt) + 1` samples, covering `t = 0, Δt, …`.
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if !(self.dt > 0.0 && self.duration > 0.0) {
            return Err(FwiError::invalid("time step and duration must be positive"));
        }
        if self.subsample == 0 {
            return Err(FwiError::invalid("subsample ratio must be at least 1"));
        }
        if !(self.frequency > 0.0) {
            return Err(FwiError::invalid("source frequency must be positive"));
        }
        for r in &self.receivers {
            if !domain.physical.contains(*r, 1e-12) {
                return Err(FwiError::PointOutside { x: r[0], z: r[1], what: "the physical domain (receiver)" });
            }
        }
        Ok(())
    }

    pub fn wavelet(&self, n: usize) -> f64 {
        self.amplitude * ricker(self.frequency, n as f64 * self.dt)
    }
}

/// Pressure at the receivers, stored time-major (`data[n * n_receivers + r]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord<T> {
    pub dt: f64,
    pub receivers: Vec<[f64; 2]>,
    pub nt: usize,
    pub data: Vec<T>,
}

impl<T: Real> ShotRecord<T> {
    pub fn zeros(shot: &ShotConfig) -> Self {
        let nt = shot.n_steps();
        ShotRecord {
            dt: shot.dt,
            receivers: shot.receivers.clone(),
            nt,
            data: vec![T::zero(); nt * shot.receivers.len()],
        }
    }

    pub fn n_receivers(&self) -> usize {
        self.receivers.len()
    }

    pub fn at(&self, n: usize, r: usize) -> T {
        self.data[n * self.n_receivers() + r]
    }

    pub fn step(&self, n: usize) -> &[T] {
        let nr = self.n_receivers();
        &self.data[n * nr..(n + 1) * nr]
    }

    pub fn trace(&self, r: usize) -> Vec<T> {
        (0..self.nt).map(|n| self.at(n, r)).collect()
    }
}

/// Forward states kept for the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshots<T> {
    pub dt: f64,
    pub subsample: usize,
    /// Absolute step indices `0, r, 2r, …` not beyond the last step.
    pub steps: Vec<usize>,
    pub states: Vec<Vec<T>>,
    /// `(u^{n+1} − u^{n−1}) / 2Δt` at the absorbing-boundary DoFs of each kept step.
    pub boundary_rate: Vec<Vec<T>>,
}

/// Number of kept states for `nt` samples at ratio `r`: `floor((nt − 1) / r) + 1`.
pub fn snapshot_count(nt: usize, r: usize) -> usize {
    (nt - 1) / r + 1
}

/// DoFs carrying absorbing-boundary damping.
pub(crate) fn boundary_dofs<T: Real>(fs: &FieldSetup<T>) -> Vec<usize> {
    (0..fs.n_dofs()).filter(|&d| fs.space.boundary_weight[d] > T::zero()).collect()
}

/// Discrete energy `½‖(u − u⁻)/Δt‖²_M + ½⟨K ū, ū⟩` with `ū = (u + u⁻)/2`.
pub fn energy<T: Real>(fs: &FieldSetup<T>, u: &[T], u_prev: &[T], dt: f64) -> f64 {
    let dt = T::lit(dt);
    let half = T::lit(0.5);
    let mean: Vec<T> = u.iter().zip(u_prev).map(|(&a, &b)| half * (a + b)).collect();
    let mut k = vec![T::zero(); u.len()];
    fs.apply_stiffness_into(&mean, &mut k);
    let kinetic: T = (0..u.len()).map(|d| fs.space.mass[d] * ((u[d] - u_prev[d]) / dt).powi(2)).sum();
    let potential: T = mean.iter().zip(&k).map(|(&a, &b)| a * b).sum();
    (half * (kinetic + potential)).as_f64()
}

/// [`energy`] restricted to the physical rectangle: kinetic part over
/// physical DoFs, potential part over elements with all DoFs physical.
pub fn physical_energy<T: Real>(fs: &FieldSetup<T>, u: &[T], u_prev: &[T], dt: f64) -> f64 {
    let sp = &*fs.space;
    let phys: Vec<bool> = sp.dofmap.regions.iter().map(|&r| r == Region::Physical).collect();
    let inside = (0..sp.n_elements()).filter(|&t| sp.dofmap.element_dofs(t).iter().all(|&d| phys[d]));
    let dt = T::lit(dt);
    let half = T::lit(0.5);
    let mean: Vec<T> = u.iter().zip(u_prev).map(|(&a, &b)| half * (a + b)).collect();
    let mut k = vec![T::zero(); u.len()];
    fs.add_stiffness_on(inside, &mean, &mut k);
    let kinetic: T = (0..u.len()).filter(|&d| phys[d]).map(|d| sp.mass[d] * ((u[d] - u_prev[d]) / dt).powi(2)).sum();
    let potential: T = mean.iter().zip(&k).map(|(&a, &b)| a * b).sum();
    (half * (kinetic + potential)).as_f64()
}

/// Diagonal coefficients of one leapfrog step.
#[derive(Debug, Clone)]
pub(crate) struct StepCoefficients<T> {
    pub inv_mu_plus: Vec<T>,
    pub mu_minus: Vec<T>,
    /// `2M/Δt² − M_r`
    pub s_diag: Vec<T>,
    pub inv_mp_plus: [Vec<T>; 2],
    pub mp_minus: [Vec<T>; 2],
}

impl<T: Real> StepCoefficients<T> {
    pub fn new(fs: &FieldSetup<T>, dt: f64) -> Self {
        let sp = &*fs.space;
        let n = sp.n_dofs();
        let dt = T::lit(dt);
        let (one, two, half) = (T::one(), T::lit(2.0), T::lit(0.5));
        let mut c = StepCoefficients {
            inv_mu_plus: vec![T::zero(); n],
            mu_minus: vec![T::zero(); n],
            s_diag: vec![T::zero(); n],
            inv_mp_plus: [vec![T::zero(); n], vec![T::zero(); n]],
            mp_minus: [vec![T::zero(); n], vec![T::zero(); n]],
        };
        for d in 0..n {
            let m = sp.mass[d];
            let m_dt2 = m / (dt * dt);
            let damp = (sp.mass_damping[d] + fs.boundary[d]) / (two * dt);
            c.inv_mu_plus[d] = one / (m_dt2 + damp);
            c.mu_minus[d] = m_dt2 - damp;
            c.s_diag[d] = two * m_dt2 - sp.mass_reaction[d];
            for (k, sigma) in [&sp.sigma_x, &sp.sigma_z].into_iter().enumerate() {
                let base = m / (two * dt);
                let damp = half * m * sigma[d];
                c.inv_mp_plus[k][d] = one / (base + damp);
                c.mp_minus[k][d] = base - damp;
            }
        }
        c
    }
}

/// Leapfrog state `(u^{n−1}, u^n, p^{n−1}, p^n)` advanced one step at a time.
pub struct Stepper<'a, T: Real> {
    fs: &'a FieldSetup<T>,
    dt: f64,
    coef: StepCoefficients<T>,
    /// Index `n` of the current state `u^n`.
    pub n: usize,
    pub u_prev: Vec<T>,
    pub u: Vec<T>,
    pub p_prev: [Vec<T>; 2],
    pub p: [Vec<T>; 2],
    u_next: Vec<T>,
    p_next: [Vec<T>; 2],
    scratch: [Vec<T>; 2],
}

impl<'a, T: Real> Stepper<'a, T> {
    /// Zero state at `n = 1` (`u⁰ = u¹ = 0`, `p⁰ = p¹ = 0`).
    pub fn new(fs: &'a FieldSetup<T>, dt: f64) -> Self {
        let n = fs.n_dofs();
        let z = || vec![T::zero(); n];
        Stepper {
            fs,
            dt,
            coef: StepCoefficients::new(fs, dt),
            n: 1,
            u_prev: z(),
            u: z(),
            p_prev: [z(), z()],
            p: [z(), z()],
            u_next: z(),
            p_next: [z(), z()],
            scratch: [z(), z()],
        }
    }

    /// Advances to `n + 1` with load vector `f^n` (already integrated against the test functions).
    pub fn step(&mut self, load: &[T]) -> Result<()> {
        let fs = self.fs;
        let sp = &*fs.space;
        let nd = sp.n_dofs();
        let c = &self.coef;
        // u^{n+1}
        let next = &mut self.u_next;
        for d in 0..nd {
            next[d] = load[d] - c.mu_minus[d] * self.u_prev[d] + c.s_diag[d] * self.u[d];
        }
        // subtract K u^n and Gᵀ p^n
        let acc = &mut self.scratch[0];
        acc.iter_mut().for_each(|v| *v = T::zero());
        fs.add_stiffness(&self.u, acc);
        if !sp.pml_elements.is_empty() {
            sp.apply_div_t(&self.p[0], &self.p[1], acc);
        }
        for d in 0..nd {
            next[d] = (next[d] - acc[d]) * c.inv_mu_plus[d];
        }
        // p^{n+1}
        if !sp.pml_elements.is_empty() {
            let [px, pz] = &mut self.p_next;
            px.iter_mut().for_each(|v| *v = T::zero());
            pz.iter_mut().for_each(|v| *v = T::zero());
            let mut scratch = [std::mem::take(&mut self.scratch[0]), std::mem::take(&mut self.scratch[1])];
            fs.add_pml_coupling(&self.u, px, pz, &mut scratch);
            self.scratch = scratch;
            for k in 0..2 {
                let (pn, pp) = (&mut self.p_next[k], &self.p_prev[k]);
                for d in 0..nd {
                    pn[d] = (c.mp_minus[k][d] * pp[d] - pn[d]) * c.inv_mp_plus[k][d];
                }
            }
            for k in 0..2 {
                std::mem::swap(&mut self.p_prev[k], &mut self.p[k]);
                std::mem::swap(&mut self.p[k], &mut self.p_next[k]);
            }
        }
        std::mem::swap(&mut self.u_prev, &mut self.u);
        std::mem::swap(&mut self.u, &mut self.u_next);
        self.n += 1;
        if self.n % 16 == 0 && !self.u.iter().all(|v| v.is_finite()) {
            return Err(FwiError::Unstable { step: self.n });
        }
        Ok(())
    }

    /// `u^{n−1}` before the last step, kept until the next step overwrites it.
    pub fn u_before_prev(&self) -> &[T] {
        &self.u_next
    }

    pub fn energy(&self) -> f64 {
        energy(self.fs, &self.u, &self.u_prev, self.dt)
    }

    pub fn physical_energy(&self) -> f64 {
        physical_energy(self.fs, &self.u, &self.u_prev, self.dt)
    }

    pub fn time(&self) -> f64 {
        self.n as f64 * self.dt
    }
}

/// Whether to keep forward states for a later gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Snapshots {
    Keep,
    Discard,
}

/// Propagates one shot; returns the receiver record and, if asked, the
/// forward states at every `shot.subsample`-th step.
pub fn forward<T: Real>(
    fs: &FieldSetup<T>,
    shot: &ShotConfig,
    keep: Snapshots,
) -> Result<(ShotRecord<T>, Option<StateSnapshots<T>>)> {
    shot.validate(&fs.space.pml.domain)?;
    let src = PointInterpolator::new(&fs.space, &[shot.source])?;
    let rec = PointInterpolator::new(&fs.space, &shot.receivers)?;
    forward_with(fs, shot, &src, &rec, keep)
}

pub(crate) fn forward_with<T: Real>(
    fs: &FieldSetup<T>,
    shot: &ShotConfig,
    src: &PointInterpolator,
    rec: &PointInterpolator,
    keep: Snapshots,
) -> Result<(ShotRecord<T>, Option<StateSnapshots<T>>)> {
    let nt = shot.n_steps();
    let nr = shot.receivers.len();
    let r = shot.subsample;
    let mut record = ShotRecord::zeros(shot);
    let bdofs = boundary_dofs(fs);
    let mut snaps = match keep {
        Snapshots::Keep => Some(StateSnapshots {
            dt: shot.dt,
            subsample: r,
            steps: Vec::with_capacity(snapshot_count(nt, r)),
            states: Vec::with_capacity(snapshot_count(nt, r)),
            boundary_rate: Vec::with_capacity(snapshot_count(nt, r)),
        }),
        Snapshots::Discard => None,
    };
    let nd = fs.n_dofs();
    if let Some(s) = snaps.as_mut() {
        s.steps.push(0);
        s.states.push(vec![T::zero(); nd]);
        s.boundary_rate.push(vec![T::zero(); bdofs.len()]);
    }
    if nt < 2 {
        return Ok((record, snaps));
    }
    // u^0 = u^1 = 0 so the first two records are zero
    let mut st = Stepper::new(fs, shot.dt);
    let mut load = vec![T::zero(); nd];
    let inv_2dt = T::lit(0.5 / shot.dt);
    for n in 1..nt - 1 {
        load.iter_mut().for_each(|v| *v = T::zero());
        src.scatter_add(&[T::lit(shot.wavelet(n))], &mut load);
        st.step(&load)?;
        // now st.u = u^{n+1}, st.u_prev = u^n, u^{n-1} in the spare buffer
        rec.eval_into(&st.u, &mut record.data[(n + 1) * nr..(n + 2) * nr]);
        if n % r == 0 {
            if let Some(s) = snaps.as_mut() {
                let older = st.u_before_prev();
                s.steps.push(n);
                s.states.push(st.u_prev.clone());
                s.boundary_rate.push(bdofs.iter().map(|&d| (st.u[d] - older[d]) * inv_2dt).collect());
            }
        }
    }
    if !st.u.iter().all(|v| v.is_finite()) {
        return Err(FwiError::Unstable { step: nt - 1 });
    }
    if (nt - 1) % r == 0 {
        if let Some(s) = snaps.as_mut() {
            s.steps.push(nt - 1);
            s.states.push(st.u.clone());
            s.boundary_rate.push(vec![T::zero(); bdofs.len()]);
        }
    }
    Ok((record, snaps))
}
