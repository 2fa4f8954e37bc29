//! Time-step bracketing around the spectral CFL estimate, and absorbing-layer efficacy.

use std::sync::Arc;

use crate::discretization::{estimate_dt_cfl, FieldSetup, PmlSpec, PointInterpolator, Space};
use crate::error::{FwiError, Result};
use crate::mesh::{structured_mesh, BoundaryKinds, BoundaryTag, Domain, PmlWidths, Rect};
use crate::propagator::{ricker, Stepper};

#[derive(Debug, Clone)]
pub struct CflRun {
    pub factor: f64,
    pub dt: f64,
    /// Energy right after the source has switched off.
    pub reference: f64,
    /// Largest energy seen afterwards (infinite once the solution is non-finite).
    pub max_after: f64,
    pub steps: usize,
}

impl CflRun {
    pub fn growth(&self) -> f64 {
        self.max_after / self.reference
    }
}

fn closed_box(h: f64, degree: u32, c: f64) -> Result<FieldSetup<f64>> {
    let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::default());
    let m = structured_mesh(&d, h, BoundaryKinds { left: BoundaryTag::FreeSurface, right: BoundaryTag::FreeSurface, bottom: BoundaryTag::FreeSurface, top: BoundaryTag::FreeSurface })?;
    let sp = Arc::new(Space::new(m, degree, PmlSpec::disabled(d))?);
    FieldSetup::new(sp.clone(), vec![c; sp.n_dofs()])
}

/// Runs a closed box at `factor × Δt_CFL` for `n_steps`, tracking the discrete energy.
pub fn cfl_run(factor: f64, n_steps: usize) -> Result<CflRun> {
    let fs = closed_box(0.05, 2, 2.0)?;
    let dt = factor * estimate_dt_cfl(&fs);
    let f0 = 10.0;
    let t_off = 3.0 / f0;
    let src = PointInterpolator::new(&fs.space, &[[0.37, -0.41]])?;
    let mut load = vec![0.0; fs.n_dofs()];
    let mut st = Stepper::new(&fs, dt);
    let mut reference = None;
    let mut max_after: f64 = 0.0;
    while st.n < n_steps {
        let t = st.time();
        load.iter_mut().for_each(|v| *v = 0.0);
        if t <= t_off {
            src.scatter_add(&[ricker(f0, t)], &mut load);
        }
        match st.step(&load) {
            Ok(()) => {}
            Err(FwiError::Unstable { .. }) => {
                max_after = f64::INFINITY;
                break;
            }
            Err(e) => return Err(e),
        }
        if st.time() > t_off {
            let e = st.energy();
            if !e.is_finite() {
                max_after = f64::INFINITY;
                break;
            }
            match reference {
                None => reference = Some(e),
                Some(_) => max_after = max_after.max(e),
            }
        }
    }
    let reference = reference.unwrap_or(f64::NAN);
    Ok(CflRun { factor, dt, reference, max_after, steps: st.n })
}

#[derive(Debug, Clone)]
pub struct PmlRun {
    pub peak: f64,
    pub last: f64,
    /// Physical-region energy sampled every few steps.
    pub trace: Vec<(f64, f64)>,
}

impl PmlRun {
    pub fn residual_fraction(&self) -> f64 {
        self.last / self.peak
    }
}

/// A 5 Hz pulse in a 1 km box at 1.5 km/s surrounded by a 300 m layer;
/// tracks the energy left in the physical rectangle.
pub fn pml_efficacy(duration: f64) -> Result<PmlRun> {
    let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::uniform(0.3));
    let m = structured_mesh(&d, 0.025, BoundaryKinds::default())?;
    let c = 1.5;
    let sp = Arc::new(Space::new(m, 2, PmlSpec::new(d, c)?)?);
    let fs = FieldSetup::new(sp.clone(), vec![c; sp.n_dofs()])?;
    let dt = 0.5 * estimate_dt_cfl(&fs);
    let f0 = 5.0;
    let src = PointInterpolator::new(&sp, &[[0.5, -0.5]])?;
    let mut load = vec![0.0; fs.n_dofs()];
    let mut st = Stepper::new(&fs, dt);
    let mut trace = vec![];
    let n_steps = (duration / dt).ceil() as usize;
    while st.n < n_steps {
        let t = st.time();
        load.iter_mut().for_each(|v| *v = 0.0);
        src.scatter_add(&[ricker(f0, t)], &mut load);
        st.step(&load)?;
        if st.n % 10 == 0 {
            trace.push((st.time(), st.physical_energy()));
        }
    }
    let peak = trace.iter().map(|p| p.1).fold(0.0, f64::max);
    let last = trace.last().map_or(0.0, |p| p.1);
    Ok(PmlRun { peak, last, trace })
}
