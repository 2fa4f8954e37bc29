//! Mass-lumped KMV triangles of degree 1-3.
//!
//! Every element is defined on the reference triangle `{(0,0), (1,0), (0,1)}`.
//! Its interpolation nodes double as the points of a positive quadrature rule,
//! so the nodal basis is Kronecker at the quadrature points and the element
//! mass matrix is diagonal with entries equal to the weights.
//!
//! Local node order is: the three vertices, then the edge nodes of edges
//! `v0->v1`, `v1->v2`, `v2->v0` (ascending edge parameter), then interior nodes.

use crate::error::{FwiError, Result};
use crate::linalg::{self, SolveError};
use crate::scalar::{rational, rational_to_f64, Pivot, Rational};

/// Edge parameter of the degree-3 edge nodes (the other node sits at `1 - a`).
pub const KMV3_EDGE_PARAM: f64 = 0.2934695559090401;
/// Barycentric coordinate of the degree-3 interior nodes `(b, b)`, `(1-2b, b)`, `(b, 1-2b)`.
pub const KMV3_INTERIOR_PARAM: f64 = 0.2073451756635909;

/// Local vertex pairs of the three reference edges.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
const INSIDE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Vertex(usize),
    /// Node on local edge `edge` at parameter `t` measured from the edge's first vertex.
    Edge { edge: usize, t: f64 },
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
struct Monomial {
    coef: f64,
    px: u32,
    py: u32,
}

/// Bivariate polynomial as a sum of monomials.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<Monomial>);

impl Poly {
    fn mono(px: u32, py: u32) -> Self {
        Poly(vec![Monomial { coef: 1.0, px, py }])
    }

    /// Cubic bubble `x y (1 - x - y)` multiplied by `x^px y^py`.
    fn bubble_times(px: u32, py: u32) -> Self {
        Poly(vec![
            Monomial { coef: 1.0, px: 1 + px, py: 1 + py },
            Monomial { coef: -1.0, px: 2 + px, py: 1 + py },
            Monomial { coef: -1.0, px: 1 + px, py: 2 + py },
        ])
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.0
            .iter()
            .map(|m| m.coef * x.powi(m.px as i32) * y.powi(m.py as i32))
            .sum()
    }

    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for m in &self.0 {
            if m.px > 0 {
                g[0] += m.coef * m.px as f64 * x.powi(m.px as i32 - 1) * y.powi(m.py as i32);
            }
            if m.py > 0 {
                g[1] += m.coef * m.py as f64 * x.powi(m.px as i32) * y.powi(m.py as i32 - 1);
            }
        }
        g
    }
}

/// A KMV reference element.
#[derive(Debug, Clone)]
pub struct ElementDef {
    pub degree: u32,
    pub nodes: Vec<[f64; 2]>,
    pub kinds: Vec<NodeKind>,
    /// Lumping quadrature weights in reference-area units (sum to 1/2).
    pub weights: Vec<f64>,
    /// Exact weights, available when all node coordinates are rational (degree <= 2).
    pub exact_weights: Option<Vec<Rational>>,
    /// Largest total degree integrated exactly by `weights`.
    pub exactness_degree: u32,
    /// Lumping rule on one edge: `(t, w)` pairs over `[0, 1]`, including the endpoints.
    pub edge_rule: Vec<(f64, f64)>,
    span: Vec<Poly>,
    /// `coeffs[i][j]`: coefficient of spanning function `j` in basis function `i`.
    coeffs: Vec<Vec<f64>>,
}

impl ElementDef {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of nodes strictly inside each edge.
    pub fn nodes_per_edge(&self) -> usize {
        self.degree as usize - 1
    }

    pub fn n_interior(&self) -> usize {
        self.kinds.iter().filter(|k| matches!(k, NodeKind::Interior)).count()
    }

    /// Basis values at `p`, which must lie in the closed reference triangle.
    pub fn eval_basis(&self, p: [f64; 2]) -> Result<Vec<f64>> {
        check_inside(p)?;
        Ok(self.basis_unchecked(p))
    }

    /// Reference-space gradients of all basis functions at `p`.
    pub fn eval_basis_grad(&self, p: [f64; 2]) -> Result<Vec<[f64; 2]>> {
        check_inside(p)?;
        Ok(self.grad_unchecked(p))
    }

    pub(crate) fn basis_unchecked(&self, p: [f64; 2]) -> Vec<f64> {
        let span: Vec<f64> = self.span.iter().map(|f| f.eval(p[0], p[1])).collect();
        self.coeffs
            .iter()
            .map(|row| row.iter().zip(&span).map(|(c, s)| c * s).sum())
            .collect()
    }

    pub(crate) fn grad_unchecked(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let span: Vec<[f64; 2]> = self.span.iter().map(|f| f.grad(p[0], p[1])).collect();
        self.coeffs
            .iter()
            .map(|row| {
                row.iter().zip(&span).fold([0.0; 2], |acc, (c, g)| {
                    [acc[0] + c * g[0], acc[1] + c * g[1]]
                })
            })
            .collect()
    }

    /// Basis values at the element's own nodes (= quadrature points).
    ///
    /// The basis is nodal, so the table is the identity; entries are checked
    /// against the polynomial evaluation and stored exactly.
    pub fn nodal_tabulation(&self) -> Vec<Vec<f64>> {
        let n = self.n_nodes();
        (0..n)
            .map(|q| {
                let vals = self.basis_unchecked(self.nodes[q]);
                (0..n)
                    .map(|i| {
                        let exact = if i == q { 1.0 } else { 0.0 };
                        debug_assert!((vals[i] - exact).abs() < 1e-10);
                        exact
                    })
                    .collect()
            })
            .collect()
    }

    /// `table[q][i]` = reference gradient of basis `i` at node `q`.
    pub fn gradient_tabulation(&self) -> Vec<Vec<[f64; 2]>> {
        self.nodes.iter().map(|&p| self.grad_unchecked(p)).collect()
    }
}

fn check_inside(p: [f64; 2]) -> Result<()> {
    let [x, y] = p;
    if x < -INSIDE_TOL || y < -INSIDE_TOL || x + y > 1.0 + INSIDE_TOL || !x.is_finite() || !y.is_finite() {
        return Err(FwiError::PointOutside { x, z: y, what: "the reference triangle" });
    }
    Ok(())
}

/// Exact integral of `x^a y^b` over the reference triangle: `a! b! / (a+b+2)!`.
pub fn monomial_moment(a: u32, b: u32) -> Rational {
    let fact = |n: u32| (1..=n as i128).product::<i128>();
    rational(fact(a) * fact(b), fact(a + b + 2))
}

/// Exact integral of `t^a` over `[0, 1]`.
fn moment_1d(a: u32) -> Rational {
    rational(1, a as i128 + 1)
}

fn pow<F: Pivot>(v: &F, e: u32) -> F {
    (0..e).fold(F::one(), |acc, _| acc * v.clone())
}

fn map_solve_error(err: SolveError, orbits: usize) -> FwiError {
    match err {
        SolveError::Singular { column } => FwiError::Quadrature(format!(
            "moment system is singular in the weight of orbit {column} (of {orbits})"
        )),
        SolveError::Inconsistent { row } => FwiError::Quadrature(format!(
            "moment system is inconsistent at equation {row}; orbit {} cannot be weighted consistently",
            orbits - 1
        )),
    }
}

fn check_positive<F: Pivot>(weights: &[F]) -> Result<()> {
    for (i, w) in weights.iter().enumerate() {
        if *w <= F::zero() {
            return Err(FwiError::Quadrature(format!("orbit {i} has non-positive weight {w:?}")));
        }
    }
    Ok(())
}

/// Solves for one weight per symmetry orbit such that all monomials of total
/// degree `<= target_degree` are integrated exactly over the reference triangle.
pub fn derive_weights<F: Pivot>(orbits: &[Vec<[F; 2]>], target_degree: u32) -> Result<Vec<F>> {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for total in 0..=target_degree {
        for a in 0..=total {
            let b = total - a;
            rows.push(
                orbits
                    .iter()
                    .map(|orbit| {
                        orbit.iter().fold(F::zero(), |acc, p| acc + pow(&p[0], a) * pow(&p[1], b))
                    })
                    .collect::<Vec<F>>(),
            );
            rhs.push(F::from_rational(&monomial_moment(a, b)));
        }
    }
    let weights = linalg::solve(rows, rhs).map_err(|e| map_solve_error(e, orbits.len()))?;
    check_positive(&weights)?;
    Ok(weights)
}

/// One-dimensional analogue of [`derive_weights`] on `[0, 1]`.
pub fn derive_weights_1d<F: Pivot>(orbits: &[Vec<F>], target_degree: u32) -> Result<Vec<F>> {
    let rows = (0..=target_degree)
        .map(|a| orbits.iter().map(|o| o.iter().fold(F::zero(), |acc, t| acc + pow(t, a))).collect())
        .collect();
    let rhs = (0..=target_degree).map(|a| F::from_rational(&moment_1d(a))).collect();
    let weights = linalg::solve(rows, rhs).map_err(|e| map_solve_error(e, orbits.len()))?;
    check_positive(&weights)?;
    Ok(weights)
}

/// Largest total degree `d` such that every monomial of degree `<= d` is
/// integrated by the rule to within `1e-13`.
pub fn exactness_degree(nodes: &[[f64; 2]], weights: &[f64]) -> u32 {
    let mut degree = 0;
    for total in 0..=20u32 {
        let exact = (0..=total).all(|a| {
            let b = total - a;
            let quad: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                .sum();
            (quad - rational_to_f64(&monomial_moment(a, b))).abs() <= 1e-13
        });
        if !exact {
            break;
        }
        degree = total;
    }
    degree
}

struct Layout {
    kinds: Vec<NodeKind>,
    nodes: Vec<[f64; 2]>,
    /// Node indices grouped into symmetry orbits.
    orbits: Vec<Vec<usize>>,
}

fn edge_point(edge: usize, t: f64) -> [f64; 2] {
    let [a, b] = EDGE_VERTICES[edge];
    let (pa, pb) = (REF_VERTICES[a], REF_VERTICES[b]);
    [(1.0 - t) * pa[0] + t * pb[0], (1.0 - t) * pa[1] + t * pb[1]]
}

fn layout(degree: u32) -> Layout {
    let mut kinds: Vec<NodeKind> = (0..3).map(NodeKind::Vertex).collect();
    let mut nodes: Vec<[f64; 2]> = REF_VERTICES.to_vec();
    let mut orbits = vec![vec![0, 1, 2]];
    let edge_params: Vec<f64> = match degree {
        2 => vec![0.5],
        3 => vec![KMV3_EDGE_PARAM, 1.0 - KMV3_EDGE_PARAM],
        _ => vec![],
    };
    if !edge_params.is_empty() {
        let start = nodes.len();
        for edge in 0..3 {
            for &t in &edge_params {
                kinds.push(NodeKind::Edge { edge, t });
                nodes.push(edge_point(edge, t));
            }
        }
        orbits.push((start..nodes.len()).collect());
    }
    let interior: Vec<[f64; 2]> = match degree {
        2 => vec![[1.0 / 3.0, 1.0 / 3.0]],
        3 => {
            let b = KMV3_INTERIOR_PARAM;
            vec![[b, b], [1.0 - 2.0 * b, b], [b, 1.0 - 2.0 * b]]
        }
        _ => vec![],
    };
    if !interior.is_empty() {
        let start = nodes.len();
        for p in interior {
            kinds.push(NodeKind::Interior);
            nodes.push(p);
        }
        orbits.push((start..nodes.len()).collect());
    }
    Layout { kinds, nodes, orbits }
}

/// Exact rational node coordinates for the degree-1 and degree-2 layouts.
fn exact_orbits(degree: u32) -> Option<Vec<Vec<[Rational; 2]>>> {
    let r = rational;
    let vertices = vec![[r(0, 1), r(0, 1)], [r(1, 1), r(0, 1)], [r(0, 1), r(1, 1)]];
    match degree {
        1 => Some(vec![vertices]),
        2 => Some(vec![
            vertices,
            vec![[r(1, 2), r(0, 1)], [r(1, 2), r(1, 2)], [r(0, 1), r(1, 2)]],
            vec![[r(1, 3), r(1, 3)]],
        ]),
        _ => None,
    }
}

fn spanning_set(degree: u32) -> Vec<Poly> {
    let mut span = Vec::new();
    for total in 0..=degree {
        for py in 0..=total {
            span.push(Poly::mono(total - py, py));
        }
    }
    match degree {
        2 => span.push(Poly::bubble_times(0, 0)),
        3 => {
            span.push(Poly::bubble_times(1, 0));
            span.push(Poly::bubble_times(0, 1));
        }
        _ => {}
    }
    span
}

fn quadrature_target(degree: u32) -> u32 {
    match degree {
        1 => 1,
        2 => 3,
        _ => 4,
    }
}

fn edge_rule(degree: u32) -> Result<Vec<(f64, f64)>> {
    let (orbits, params): (Vec<Vec<f64>>, Vec<f64>) = match degree {
        1 => (vec![vec![0.0, 1.0]], vec![]),
        2 => (vec![vec![0.0, 1.0], vec![0.5]], vec![0.5]),
        _ => {
            let a = KMV3_EDGE_PARAM;
            (vec![vec![0.0, 1.0], vec![a, 1.0 - a]], vec![a, 1.0 - a])
        }
    };
    let w = derive_weights_1d(&orbits, degree)?;
    let mut rule = vec![(0.0, w[0])];
    rule.extend(params.iter().map(|&t| (t, w[1])));
    rule.push((1.0, w[0]));
    Ok(rule)
}

/// Builds the KMV triangle of the given degree.
pub fn kmv_element(degree: u32) -> Result<ElementDef> {
    if !(1..=3).contains(&degree) {
        return Err(FwiError::UnsupportedDegree(degree));
    }
    let Layout { kinds, nodes, orbits } = layout(degree);
    let target = quadrature_target(degree);

    let (weights, exact_weights) = match exact_orbits(degree) {
        Some(exact) => {
            let per_orbit = derive_weights(&exact, target)?;
            let mut exact_w = vec![rational(0, 1); nodes.len()];
            for (orbit, w) in orbits.iter().zip(&per_orbit) {
                for &i in orbit {
                    exact_w[i] = *w;
                }
            }
            (exact_w.iter().map(rational_to_f64).collect(), Some(exact_w))
        }
        None => {
            let float_orbits: Vec<Vec<[f64; 2]>> =
                orbits.iter().map(|o| o.iter().map(|&i| nodes[i]).collect()).collect();
            let per_orbit = derive_weights(&float_orbits, target)?;
            let mut w = vec![0.0; nodes.len()];
            for (orbit, wo) in orbits.iter().zip(&per_orbit) {
                for &i in orbit {
                    w[i] = *wo;
                }
            }
            (w, None)
        }
    };
    let exactness = exactness_degree(&nodes, &weights);

    let span = spanning_set(degree);
    debug_assert_eq!(span.len(), nodes.len());
    let vandermonde: Vec<Vec<f64>> =
        nodes.iter().map(|p| span.iter().map(|f| f.eval(p[0], p[1])).collect()).collect();
    let inv = linalg::invert(&vandermonde).map_err(|_| {
        FwiError::Quadrature(format!("generalized Vandermonde of degree {degree} is singular"))
    })?;
    // phi_i = sum_j inv[j][i] span_j
    let n = nodes.len();
    let coeffs = (0..n).map(|i| (0..n).map(|j| inv[j][i]).collect()).collect();

    Ok(ElementDef {
        degree,
        nodes,
        kinds,
        weights,
        exact_weights,
        exactness_degree: exactness,
        edge_rule: edge_rule(degree)?,
        span,
        coeffs,
    })
}
