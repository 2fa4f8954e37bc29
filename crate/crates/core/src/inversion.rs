//! Projected L-BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{FwiError, Result};
use crate::scalar::Real;

/// Smooth objective over a nodal control.
pub trait Objective<T: Real> {
    /// Misfit and gradient at `c`.
    fn evaluate(&mut self, c: &[T]) -> Result<(f64, Vec<T>)>;

    /// Inner product in which the gradient is a Riesz representative.
    fn dot(&self, a: &[T], b: &[T]) -> f64 {
        a.iter().zip(b).map(|(&x, &y)| (x * y).as_f64()).sum()
    }
}

/// Clamps every entry of `c` into `[lo, hi]`.
pub fn project_bounds<T: Real>(c: &mut [T], lo: f64, hi: f64) {
    let (l, h) = (T::lit(lo), T::lit(hi));
    for v in c {
        if *v < l {
            *v = l;
        } else if *v > h {
            *v = h;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub max_trials: usize,
    pub alpha_max: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        WolfeParams { c1: 1e-4, c2: 0.9, max_trials: 20, alpha_max: 1e8 }
    }
}

/// A trial point `(α, φ(α), φ'(α))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub alpha: f64,
    pub value: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineSearch {
    /// Both strong-Wolfe conditions hold.
    Converged { point: Trial, trials: usize },
    /// Trial budget exhausted; `best` is the lowest point meeting sufficient decrease, if any.
    Exhausted { best: Option<Trial>, trials: usize },
}

/// Bracketing and zoom search for a step meeting
/// `φ(α) ≤ φ(0) + c1 α φ'(0)` and `|φ'(α)| ≤ c2 |φ'(0)|`.
pub fn wolfe_line_search(
    mut phi: impl FnMut(f64) -> Result<(f64, f64)>,
    phi0: f64,
    dphi0: f64,
    alpha0: f64,
    p: &WolfeParams,
) -> Result<LineSearch> {
    if !(dphi0 < 0.0) {
        return Err(FwiError::LineSearch(format!("not a descent direction: slope {dphi0:e}")));
    }
    if !(alpha0 > 0.0) {
        return Err(FwiError::LineSearch(format!("initial step {alpha0} is not positive")));
    }
    let armijo = |t: &Trial| t.value <= phi0 + p.c1 * t.alpha * dphi0;
    let curvature = |t: &Trial| t.slope.abs() <= -p.c2 * dphi0;
    let mut trials = 0;
    let mut best: Option<Trial> = None;
    let mut eval = |alpha: f64, trials: &mut usize, best: &mut Option<Trial>| -> Result<Trial> {
        *trials += 1;
        let (value, slope) = phi(alpha)?;
        let t = Trial { alpha, value, slope };
        if armijo(&t) && best.is_none_or(|b| t.value < b.value) {
            *best = Some(t);
        }
        Ok(t)
    };

    let mut prev = Trial { alpha: 0.0, value: phi0, slope: dphi0 };
    let mut alpha = alpha0.min(p.alpha_max);
    let (mut lo, mut hi);
    loop {
        if trials >= p.max_trials {
            return Ok(LineSearch::Exhausted { best, trials });
        }
        let t = eval(alpha, &mut trials, &mut best)?;
        if !armijo(&t) || (prev.alpha > 0.0 && t.value >= prev.value) {
            (lo, hi) = (prev, t);
            break;
        }
        if curvature(&t) {
            return Ok(LineSearch::Converged { point: t, trials });
        }
        if t.slope >= 0.0 {
            (lo, hi) = (t, prev);
            break;
        }
        if alpha >= p.alpha_max {
            return Ok(LineSearch::Exhausted { best, trials });
        }
        prev = t;
        alpha = (2.0 * alpha).min(p.alpha_max);
    }

    while trials < p.max_trials {
        let alpha = zoom_trial(&lo, &hi);
        let t = eval(alpha, &mut trials, &mut best)?;
        if !armijo(&t) || t.value >= lo.value {
            hi = t;
        } else {
            if curvature(&t) {
                return Ok(LineSearch::Converged { point: t, trials });
            }
            if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = t;
        }
        if (hi.alpha - lo.alpha).abs() <= 1e-14 * lo.alpha.abs().max(1e-300) {
            break;
        }
    }
    Ok(LineSearch::Exhausted { best, trials })
}

/// Cubic interpolation between the bracket ends, safeguarded to the middle 80%.
fn zoom_trial(lo: &Trial, hi: &Trial) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let (left, right) = (a.min(b), a.max(b));
    let w = right - left;
    let d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    let mut t = f64::NAN;
    if hi.value.is_finite() && disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    }
    if !t.is_finite() || t < left + 0.1 * w || t > right - 0.1 * w {
        t = 0.5 * (left + right);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    pub iter_max: usize,
    /// Stop when the gradient norm drops below this.
    pub tol: f64,
    pub lower: f64,
    pub upper: f64,
    pub memory: usize,
    pub wolfe: WolfeParams,
    /// Largest entry change of the first step and of steps after a memory reset.
    pub first_step: f64,
    pub max_failures: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            iter_max: 50,
            tol: 1e-10,
            lower: 1.0,
            upper: 5.0,
            memory: 10,
            wolfe: WolfeParams::default(),
            first_step: 1.0,
            max_failures: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    GradientTolerance,
    LineSearchFailures,
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub misfit: f64,
    pub gnorm: f64,
    pub alpha: f64,
    pub n_linesearch: usize,
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:.12e} {:.6e} {:.6e} {}", self.iter, self.misfit, self.gnorm, self.alpha, self.n_linesearch)
    }
}

#[derive(Debug, Clone)]
pub struct InversionState<T> {
    pub iteration: usize,
    pub c: Vec<T>,
    pub lower: f64,
    pub upper: f64,
    /// Curvature pairs `(s, y)`, oldest first.
    pub memory: VecDeque<(Vec<T>, Vec<T>)>,
    /// Misfit at the start model followed by every accepted iterate.
    pub history: Vec<f64>,
    pub log: Vec<IterationRecord>,
    pub consecutive_failures: usize,
    pub failed_line_searches: usize,
    pub stop: Option<StopReason>,
}

/// L-BFGS two-loop recursion: `−H g` in the objective's inner product.
fn lbfgs_direction<T: Real, O: Objective<T>>(obj: &O, memory: &VecDeque<(Vec<T>, Vec<T>)>, g: &[T]) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().map(|v| v.as_f64()).collect();
    let lit = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
    let pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = memory
        .iter()
        .map(|(s, y)| (lit(s), lit(y), 1.0 / obj.dot(y, s)))
        .collect();
    let fdot = |a: &[f64], b: &[f64]| obj.dot(&to_t::<T>(a), &to_t::<T>(b));
    let mut alphas = vec![0.0; pairs.len()];
    for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
        alphas[k] = rho * fdot(s, &q);
        q.iter_mut().zip(y).for_each(|(a, &b)| *a -= alphas[k] * b);
    }
    if let Some((s, y, _)) = pairs.last() {
        let gamma = fdot(s, y) / fdot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (k, (s, y, rho)) in pairs.iter().enumerate() {
        let beta = rho * fdot(y, &q);
        q.iter_mut().zip(s).for_each(|(a, &b)| *a += (alphas[k] - beta) * b);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn to_t<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

/// Zeroes direction entries that push against an active bound.
fn free_direction<T: Real>(c: &[T], d: &mut [f64], lo: f64, hi: f64) {
    for (v, di) in c.iter().zip(d.iter_mut()) {
        let v = v.as_f64();
        if (v <= lo && *di < 0.0) || (v >= hi && *di > 0.0) {
            *di = 0.0;
        }
    }
}

/// Runs projected L-BFGS from `c0`, calling `on_iter` after every accepted step.
pub fn invert<T: Real, O: Objective<T>>(
    obj: &mut O,
    c0: Vec<T>,
    opts: &InversionOptions,
    mut on_iter: impl FnMut(&IterationRecord),
) -> Result<InversionState<T>> {
    if opts.iter_max == 0 {
        return Err(FwiError::invalid("iter_max must be at least 1"));
    }
    if !(opts.lower < opts.upper) {
        return Err(FwiError::invalid(format!("bounds [{}, {}] are empty", opts.lower, opts.upper)));
    }
    if let Some(v) = c0.iter().map(|v| v.as_f64()).find(|&v| !(opts.lower..=opts.upper).contains(&v)) {
        return Err(FwiError::invalid(format!("start model value {v} lies outside [{}, {}]", opts.lower, opts.upper)));
    }
    let (lo, hi) = (opts.lower, opts.upper);
    let (mut j, mut g) = obj.evaluate(&c0)?;
    if !j.is_finite() {
        return Err(FwiError::NonFiniteMisfit { iteration: 0, value: j });
    }
    let mut st = InversionState {
        iteration: 0,
        c: c0,
        lower: lo,
        upper: hi,
        memory: VecDeque::new(),
        history: vec![j],
        log: vec![],
        consecutive_failures: 0,
        failed_line_searches: 0,
        stop: None,
    };
    while st.iteration < opts.iter_max {
        let gnorm = obj.dot(&g, &g).sqrt();
        if gnorm < opts.tol {
            st.stop = Some(StopReason::GradientTolerance);
            return Ok(st);
        }
        let mut dir = lbfgs_direction(obj, &st.memory, &g);
        free_direction(&st.c, &mut dir, lo, hi);
        let mut slope = obj.dot(&g, &to_t::<T>(&dir));
        if !(slope < 0.0) {
            st.memory.clear();
            dir = g.iter().map(|v| -v.as_f64()).collect();
            free_direction(&st.c, &mut dir, lo, hi);
            slope = obj.dot(&g, &to_t::<T>(&dir));
            if !(slope < 0.0) {
                // projected gradient vanishes: a bound-constrained stationary point
                st.stop = Some(StopReason::GradientTolerance);
                return Ok(st);
            }
        }
        let alpha0 = if st.memory.is_empty() {
            let dmax = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (opts.first_step / dmax).min(1.0)
        } else {
            1.0
        };

        let base = st.c.clone();
        let mut evaluated: Vec<(f64, Vec<T>, Vec<T>, f64)> = vec![];
        let iteration = st.iteration;
        let search = wolfe_line_search(
            |alpha| {
                let mut trial: Vec<T> = base.iter().zip(&dir).map(|(&c, &d)| c + T::lit(alpha * d)).collect();
                project_bounds(&mut trial, lo, hi);
                let (jt, gt) = obj.evaluate(&trial)?;
                if !jt.is_finite() {
                    return Err(FwiError::NonFiniteMisfit { iteration: iteration + 1, value: jt });
                }
                // one-sided slope along the projected path
                let mut active = dir.clone();
                for (a, &b) in active.iter_mut().zip(&base) {
                    let raw = b.as_f64() + alpha * *a;
                    if raw < lo || raw > hi {
                        *a = 0.0;
                    }
                }
                let dt = obj.dot(&gt, &to_t::<T>(&active));
                evaluated.push((alpha, trial, gt, jt));
                Ok((jt, dt))
            },
            j,
            slope,
            alpha0,
            &opts.wolfe,
        )?;
        let (point, trials) = match search {
            LineSearch::Converged { point, trials } => (Some(point), trials),
            LineSearch::Exhausted { best, trials } => (best, trials),
        };
        let Some(point) = point else {
            st.failed_line_searches += 1;
            st.consecutive_failures += 1;
            st.memory.clear();
            if st.consecutive_failures >= opts.max_failures {
                st.stop = Some(StopReason::LineSearchFailures);
                return Ok(st);
            }
            continue;
        };
        let (_, c_new, g_new, j_new) = evaluated.into_iter().rev().find(|e| e.0 == point.alpha).expect("trial was evaluated");
        if !(j_new < j) {
            st.failed_line_searches += 1;
            st.consecutive_failures += 1;
            st.memory.clear();
            if st.consecutive_failures >= opts.max_failures {
                st.stop = Some(StopReason::LineSearchFailures);
                return Ok(st);
            }
            continue;
        }
        st.consecutive_failures = 0;
        let s: Vec<T> = c_new.iter().zip(&st.c).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        if obj.dot(&s, &y) > 1e-12 {
            if st.memory.len() == opts.memory {
                st.memory.pop_front();
            }
            st.memory.push_back((s, y));
        }
        st.c = c_new;
        g = g_new;
        j = j_new;
        st.iteration += 1;
        st.history.push(j);
        let rec = IterationRecord { iter: st.iteration, misfit: j, gnorm: obj.dot(&g, &g).sqrt(), alpha: point.alpha, n_linesearch: trials };
        on_iter(&rec);
        st.log.push(rec);
    }
    st.stop = Some(StopReason::MaxIterations);
    Ok(st)
}
