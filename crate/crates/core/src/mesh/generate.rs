use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FwiError, Result};

use super::{mesh_quality, triangulate, BoundaryKinds, Domain, Mesh, SizingField};

/// Tuning of the force-equilibrium mesher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    pub max_iter: usize,
    /// Spring rest-length inflation; values above 1 push points towards the boundary.
    pub fscale: f64,
    pub deltat: f64,
    /// Stop once every interior point moves less than `dptol` times its local target.
    pub dptol: f64,
    /// Retriangulate once some point has moved `ttol` times its local target.
    pub ttol: f64,
    pub min_angle_deg: f64,
    /// Required fraction of edges within ±20% of the target length.
    pub min_within_20: f64,
    pub boundary: BoundaryKinds,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            max_iter: 1000,
            fscale: 1.2,
            deltat: 0.2,
            dptol: 1e-3,
            ttol: 0.1,
            min_angle_deg: 25.0,
            min_within_20: 0.9,
            boundary: BoundaryKinds::default(),
        }
    }
}

fn bars(tris: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut out: Vec<[usize; 2]> = Vec::with_capacity(tris.len() * 3);
    for t in tris {
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            out.push(if a < b { [a, b] } else { [b, a] });
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Unstructured mesh of `domain.extended()` whose edge lengths follow `sf`.
///
/// Points are seeded on a hexagonal lattice at the finest target spacing and
/// kept with probability `(h_min / l_e)^2`, then relaxed by repeated Delaunay
/// retriangulation and repulsive edge springs. The same seed gives the same mesh.
pub fn generate_mesh(domain: &Domain, sf: &SizingField, seed: u64, opts: &MeshOptions) -> Result<Mesh> {
    let rect = domain.extended();
    if [domain.pml.left, domain.pml.right, domain.pml.bottom, domain.pml.top].iter().any(|&w| !(w >= 0.0)) {
        return Err(FwiError::invalid("absorbing layer widths must be non-negative"));
    }
    if !(rect.width() > 0.0 && rect.height() > 0.0) {
        return Err(FwiError::invalid("domain must have positive extent"));
    }
    let h = |p: [f64; 2]| sf.eval(p);
    let h0 = sf.min();
    let geps = 1e-3 * h0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let corners = [
        [rect.x_min, rect.z_min],
        [rect.x_max, rect.z_min],
        [rect.x_max, rect.z_max],
        [rect.x_min, rect.z_max],
    ];
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for k in 0..4 {
        pts.extend(side_points(corners[k], corners[(k + 1) % 4], &h));
    }
    let n_fixed = pts.len();
    let dz = h0 * 3f64.sqrt() / 2.0;
    let nz = (rect.height() / dz).floor() as usize;
    let nx = (rect.width() / h0).floor() as usize;
    for j in 0..=nz {
        let shift = if j % 2 == 1 { 0.5 * h0 } else { 0.0 };
        for i in 0..=nx {
            let p = [rect.x_min + i as f64 * h0 + shift, rect.z_min + j as f64 * dz];
            let hp = h(p);
            if rect.signed_distance(p) > -0.5 * hp {
                continue;
            }
            let keep = (h0 / hp).powi(2);
            if rng.gen::<f64>() < keep {
                pts.push(p);
            }
        }
    }

    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut at_last_triangulation: Vec<[f64; 2]> = Vec::new();
    let mut force = vec![[0.0f64; 2]; pts.len()];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let moved = at_last_triangulation.len() != pts.len()
            || pts.iter().zip(&at_last_triangulation).any(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]) > opts.ttol * h(*p));
        if moved {
            at_last_triangulation = pts.clone();
            edges = bars(&interior_triangles(&pts, &rect, geps));
        }

        let mut sum_l2 = 0.0;
        let mut sum_h2 = 0.0;
        let geom: Vec<(f64, f64)> = edges
            .iter()
            .map(|e| {
                let (a, b) = (pts[e[0]], pts[e[1]]);
                let l = (a[0] - b[0]).hypot(a[1] - b[1]);
                let hb = h([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                sum_l2 += l * l;
                sum_h2 += hb * hb;
                (l, hb)
            })
            .collect();
        let scale = opts.fscale * (sum_l2 / sum_h2).sqrt();
        force.iter_mut().for_each(|f| *f = [0.0; 2]);
        for (e, &(l, hb)) in edges.iter().zip(&geom) {
            let push = (hb * scale - l).max(0.0);
            if push == 0.0 || l == 0.0 {
                continue;
            }
            let (a, b) = (pts[e[0]], pts[e[1]]);
            let fx = push / l * (a[0] - b[0]);
            let fz = push / l * (a[1] - b[1]);
            force[e[0]][0] += fx;
            force[e[0]][1] += fz;
            force[e[1]][0] -= fx;
            force[e[1]][1] -= fz;
        }

        let mut max_move = 0.0f64;
        for (k, p) in pts.iter_mut().enumerate().skip(n_fixed) {
            let step = [opts.deltat * force[k][0], opts.deltat * force[k][1]];
            let old = *p;
            *p = rect.clamp([p[0] + step[0], p[1] + step[1]]);
            if rect.signed_distance(old) < -geps {
                max_move = max_move.max(step[0].hypot(step[1]) / h(old));
            }
        }
        if max_move < opts.dptol {
            converged = true;
            break;
        }
    }

    let tris = interior_triangles(&pts, &rect, geps);
    let mut used = vec![usize::MAX; pts.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(tris.len());
    for t in &tris {
        let mut out = [0; 3];
        for (o, &v) in out.iter_mut().zip(t) {
            if used[v] == usize::MAX {
                used[v] = vertices.len();
                vertices.push(pts[v]);
            }
            *o = used[v];
        }
        triangles.push(out);
    }
    let mesh = Mesh::from_parts(vertices, triangles, domain, opts.boundary)?;
    mesh.validate()?;
    let report = mesh_quality(&mesh, Some(sf));
    let dev = report.sizing.as_ref().expect("sizing supplied");
    let area_ok = (report.area_sum - rect.area()).abs() <= 1e-9 * rect.area();
    if report.min_angle_deg < opts.min_angle_deg
        || dev.within_20 < opts.min_within_20
        || !(0.8..=1.2).contains(&dev.median_ratio)
        || !area_ok
    {
        let state = if converged { "converged" } else { "iteration limit reached" };
        return Err(FwiError::MeshQuality(format!("{state}; targets missed:\n{report}")));
    }
    Ok(mesh)
}

/// Points from `a` (inclusive) towards `b` (exclusive) spaced by the local target length.
fn side_points(a: [f64; 2], b: [f64; 2], h: &impl Fn([f64; 2]) -> f64) -> Vec<[f64; 2]> {
    const SAMPLES: usize = 2048;
    let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    // cumulative number of target lengths along the side (midpoint rule)
    let mut cum = vec![0.0; SAMPLES + 1];
    for i in 0..SAMPLES {
        let t = (i as f64 + 0.5) / SAMPLES as f64;
        cum[i + 1] = cum[i] + len / SAMPLES as f64 / h(at(t));
    }
    let n = cum[SAMPLES].round().max(1.0) as usize;
    let mut out = vec![a];
    let mut i = 0;
    for k in 1..n {
        let target = cum[SAMPLES] * k as f64 / n as f64;
        while cum[i + 1] < target {
            i += 1;
        }
        let frac = (target - cum[i]) / (cum[i + 1] - cum[i]);
        out.push(at((i as f64 + frac) / SAMPLES as f64));
    }
    out
}

/// Delaunay triangles whose centroid lies inside the rectangle by more than `geps`.
fn interior_triangles(pts: &[[f64; 2]], rect: &super::Rect, geps: f64) -> Vec<[usize; 3]> {
    triangulate(pts)
        .into_iter()
        .filter(|t| {
            let c = [
                (pts[t[0]][0] + pts[t[1]][0] + pts[t[2]][0]) / 3.0,
                (pts[t[0]][1] + pts[t[1]][1] + pts[t[2]][1]) / 3.0,
            ];
            rect.signed_distance(c) < -geps
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2;
    use crate::mesh::{PmlWidths, Rect, Region};

    fn unit() -> Domain {
        Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::default())
    }

    #[test]
    fn uniform_triangle_count() {
        let h = 0.1;
        let sf = SizingField::uniform(Grid2::new(2, 2, [0.0, -1.0], [1.0, 1.0]).unwrap(), h).unwrap();
        let m = generate_mesh(&unit(), &sf, 1, &MeshOptions::default()).unwrap();
        let expect = 2.0 / (h * h);
        let n = m.n_triangles() as f64;
        assert!((n - expect).abs() <= 0.3 * expect, "{n} triangles");
        assert!(m.regions.iter().all(|&r| r == Region::Physical));
        assert!((m.total_area() - 1.0).abs() < 1e-10);
    }

    fn graded(c: f64) -> (Domain, SizingField) {
        let g = Grid2::new(101, 101, [-0.2, -1.2], [0.014, 0.014]).unwrap();
        let vm = crate::io::VelocityModel::from_fn(g, |x, z| 1.5 + 2.0 * x * x + if z < -0.5 { 1.0 } else { 0.0 }).unwrap();
        let sf = crate::mesh::gradation_limit(&crate::mesh::sizing_from_velocity(&vm, 5.0, c, 0.0).unwrap()).unwrap();
        (Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::uniform(0.2)), sf)
    }

    #[test]
    fn graded_mesh_meets_targets_and_scales_quadratically() {
        let (d, sf4) = graded(4.0);
        let m4 = generate_mesh(&d, &sf4, 3, &MeshOptions::default()).unwrap();
        let (_, sf8) = graded(8.0);
        let m8 = generate_mesh(&d, &sf8, 3, &MeshOptions::default()).unwrap();
        let q = mesh_quality(&m8, Some(&sf8));
        assert!(q.min_angle_deg >= 25.0);
        assert!(q.sizing.unwrap().within_20 >= 0.9);
        assert!((q.area_sum - 1.96).abs() < 1e-10);
        let ratio = m8.n_triangles() as f64 / m4.n_triangles() as f64;
        assert!((3.0..=5.0).contains(&ratio), "cell count ratio {ratio}");
        assert!(m8.regions.contains(&Region::Pml) && m8.regions.contains(&Region::Physical));
    }

    #[test]
    fn deterministic_for_seed() {
        let sf = SizingField::uniform(Grid2::new(2, 2, [0.0, -1.0], [1.0, 1.0]).unwrap(), 0.2).unwrap();
        let a = generate_mesh(&unit(), &sf, 9, &MeshOptions::default()).unwrap();
        let b = generate_mesh(&unit(), &sf, 9, &MeshOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
