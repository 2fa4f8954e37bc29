use approx::assert_relative_eq;
use kmv_fwi::inversion::{invert, project_bounds, wolfe_line_search, InversionOptions, LineSearch, Objective, StopReason, WolfeParams};
use kmv_fwi::{FwiError, Result};

struct Bowl {
    target: Vec<f64>,
    weights: Vec<f64>,
    evals: usize,
}

impl Objective<f64> for Bowl {
    fn evaluate(&mut self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evals += 1;
        let g: Vec<f64> = c.iter().zip(&self.target).zip(&self.weights).map(|((a, b), w)| w * (a - b)).collect();
        let j = 0.5 * c.iter().zip(&self.target).zip(&self.weights).map(|((a, b), w)| w * (a - b).powi(2)).sum::<f64>();
        Ok((j, g))
    }
}

fn bowl(target: Vec<f64>) -> Bowl {
    let n = target.len();
    Bowl { target, weights: vec![1.0; n], evals: 0 }
}

#[test]
fn wolfe_on_parabola() {
    let p = WolfeParams::default();
    let phi = |a: f64| Ok(((a - 1.0).powi(2), 2.0 * (a - 1.0)));
    let LineSearch::Converged { point, .. } = wolfe_line_search(phi, 1.0, -2.0, 0.1, &p).unwrap() else {
        panic!("no convergence")
    };
    assert!(point.value <= 1.0 + p.c1 * point.alpha * -2.0);
    assert!(point.slope.abs() <= p.c2 * 2.0);
    assert!((point.alpha - 1.0).abs() < 0.95);
}

#[test]
fn wolfe_accepts_unit_step_first() {
    let phi = |a: f64| Ok(((a - 1.0).powi(2), 2.0 * (a - 1.0)));
    match wolfe_line_search(phi, 1.0, -2.0, 1.0, &WolfeParams::default()).unwrap() {
        LineSearch::Converged { point, trials } => {
            assert_eq!(point.alpha, 1.0);
            assert_eq!(trials, 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn wolfe_rejects_ascent() {
    let phi = |a: f64| Ok((a, 1.0));
    assert!(matches!(wolfe_line_search(phi, 0.0, 1.0, 1.0, &WolfeParams::default()), Err(FwiError::LineSearch(_))));
}

#[test]
fn wolfe_zooms_past_overshoot() {
    // steep quartic where the first trial overshoots badly
    let phi = |a: f64| Ok(((a - 0.01).powi(4) - 1e-8, 4.0 * (a - 0.01).powi(3)));
    let (f0, d0) = phi(0.0).unwrap();
    match wolfe_line_search(phi, f0, d0, 1.0, &WolfeParams::default()).unwrap() {
        LineSearch::Converged { point, .. } => {
            assert!(point.value <= f0 + 1e-4 * point.alpha * d0);
            assert!(point.slope.abs() <= 0.9 * d0.abs());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn projection_clamps() {
    let mut c = vec![0.5, 3.0, 7.0];
    project_bounds(&mut c, 1.0, 5.0);
    assert_eq!(c, vec![1.0, 3.0, 5.0]);
}

#[test]
fn quadratic_bowl_converges_fast() {
    let mut obj = bowl(vec![2.0, 3.5, 1.5, 4.0]);
    let opts = InversionOptions { tol: 1e-12, ..Default::default() };
    let st = invert(&mut obj, vec![3.0; 4], &opts, |_| {}).unwrap();
    assert!(st.iteration <= 3, "{}", st.iteration);
    for (a, b) in st.c.iter().zip(&obj.target) {
        assert!((a - b).abs() < 1e-8);
    }
    assert_eq!(st.stop, Some(StopReason::GradientTolerance));
}

#[test]
fn ill_conditioned_bowl_uses_curvature() {
    let mut obj = bowl(vec![2.0, 3.5, 1.5, 4.0, 2.5]);
    obj.weights = vec![1.0, 10.0, 100.0, 3.0, 30.0];
    let opts = InversionOptions { tol: 1e-9, first_step: 0.5, ..Default::default() };
    let st = invert(&mut obj, vec![3.0; 5], &opts, |_| {}).unwrap();
    for (a, b) in st.c.iter().zip(&obj.target) {
        assert_relative_eq!(*a, *b, epsilon = 1e-8);
    }
    assert!(st.iteration < 30);
    for w in st.history.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn bowl_outside_box_lands_on_projection() {
    let mut obj = bowl(vec![0.2, 3.0, 6.5, 4.9]);
    let opts = InversionOptions { tol: 1e-12, iter_max: 100, ..Default::default() };
    let st = invert(&mut obj, vec![2.0; 4], &opts, |_| {}).unwrap();
    let expect = [1.0, 3.0, 5.0, 4.9];
    for (a, b) in st.c.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-8, "{:?}", st.c);
    }
    assert!(st.c.iter().all(|&v| (1.0..=5.0).contains(&v)));
}

#[test]
fn log_lines_have_five_fields() {
    let mut obj = bowl(vec![2.0, 2.5]);
    let mut lines = vec![];
    invert(&mut obj, vec![3.0; 2], &InversionOptions::default(), |r| lines.push(r.to_string())).unwrap();
    assert!(!lines.is_empty());
    for l in &lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        assert_eq!(f.len(), 5);
        f[1].parse::<f64>().unwrap();
        f[4].parse::<usize>().unwrap();
    }
}

struct Flat;

impl Objective<f64> for Flat {
    fn evaluate(&mut self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        // gradient claims descent but the value never drops
        Ok((1.0, vec![-1.0; c.len()]))
    }
}

#[test]
fn repeated_failures_stop() {
    let st = invert(&mut Flat, vec![2.0; 3], &InversionOptions::default(), |_| {}).unwrap();
    assert_eq!(st.stop, Some(StopReason::LineSearchFailures));
    assert_eq!(st.iteration, 0);
    assert_eq!(st.failed_line_searches, 5);
}

struct Nan;

impl Objective<f64> for Nan {
    fn evaluate(&mut self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((f64::NAN, vec![0.0; c.len()]))
    }
}

#[test]
fn nan_misfit_aborts() {
    assert!(matches!(invert(&mut Nan, vec![2.0], &InversionOptions::default(), |_| {}), Err(FwiError::NonFiniteMisfit { .. })));
}

#[test]
fn start_outside_bounds_rejected() {
    let mut obj = bowl(vec![2.0]);
    assert!(invert(&mut obj, vec![9.0], &InversionOptions::default(), |_| {}).is_err());
}
