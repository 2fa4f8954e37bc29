use crate::error::{FwiError, Result};

use super::{BoundaryKinds, Domain, Mesh};

/// Breakpoints along one axis: each non-empty segment between consecutive
/// interfaces is divided into equal cells no longer than `h`.
fn axis_nodes(cuts: [f64; 4], h: f64) -> Vec<f64> {
    let mut nodes = vec![cuts[0]];
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let n = ((len / h) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            nodes.push(if k == n { w[1] } else { w[0] + len * k as f64 / n as f64 });
        }
    }
    nodes
}

/// Right-triangle split of a tensor grid whose lines include the
/// physical/absorbing-layer interfaces.
pub fn structured_mesh(domain: &Domain, h: f64, kinds: BoundaryKinds) -> Result<Mesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(FwiError::invalid(format!("mesh size must be positive, got {h}")));
    }
    let e = domain.extended();
    let p = &domain.physical;
    let xs = axis_nodes([e.x_min, p.x_min, p.x_max, e.x_max], h);
    let zs = axis_nodes([e.z_min, p.z_min, p.z_max, e.z_max], h);
    let nx = xs.len();
    let mut vertices = Vec::with_capacity(nx * zs.len());
    for &z in &zs {
        for &x in &xs {
            vertices.push([x, z]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (zs.len() - 1));
    for j in 0..zs.len() - 1 {
        for i in 0..nx - 1 {
            let v00 = j * nx + i;
            let (v10, v01, v11) = (v00 + 1, v00 + nx, v00 + nx + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_parts(vertices, triangles, domain, kinds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{PmlWidths, Rect, Region};

    #[test]
    fn unit_square_half_spacing() {
        let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::default());
        let m = structured_mesh(&d, 0.5, BoundaryKinds::default()).unwrap();
        assert_eq!(m.n_triangles(), 8);
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.boundary.len(), 8);
        m.validate().unwrap();
    }

    #[test]
    fn pml_band_tagging() {
        let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::uniform(0.25));
        let m = structured_mesh(&d, 0.25, BoundaryKinds::default()).unwrap();
        m.validate().unwrap();
        assert_eq!(m.n_vertices(), 49);
        for (v, r) in m.vertices.iter().zip(&m.regions) {
            let inside = (0.0..=1.0).contains(&v[0]) && (-1.0..=0.0).contains(&v[1]);
            assert_eq!(*r == Region::Physical, inside, "{v:?}");
        }
        assert!((m.total_area() - 2.25).abs() < 1e-12);
    }

    #[test]
    fn interfaces_are_grid_lines() {
        let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::sides_and_bottom(0.2));
        let m = structured_mesh(&d, 0.15, BoundaryKinds::default()).unwrap();
        for x in [-0.2, 0.0, 1.0, 1.2] {
            assert!(m.vertices.iter().any(|v| (v[0] - x).abs() < 1e-15));
        }
        assert!(m.vertices.iter().all(|v| v[1] <= 0.0));
    }
}
