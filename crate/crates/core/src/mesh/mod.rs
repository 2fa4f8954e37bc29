//! Triangular meshes of the rectangular physical domain plus its absorbing layer.
//!
//! Coordinates are `(x, z)` in km with the depth axis `z` pointing up, so the
//! subsurface has `z <= 0`.

mod delaunay;
mod generate;
mod quality;
mod sizing;
mod structured;

use std::collections::HashMap;

use crate::error::{FwiError, Result};

pub use delaunay::triangulate;
pub use generate::{generate_mesh, MeshOptions};
pub use quality::{mesh_quality, QualityReport};
pub use sizing::{gradation_limit, sizing_from_velocity, SizingField};
pub use structured::structured_mesh;

const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64) -> Self {
        Rect { x_min, x_max, z_min, z_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.z_max - self.z_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x_min - tol && p[0] <= self.x_max + tol && p[1] >= self.z_min - tol && p[1] <= self.z_max + tol
    }

    /// Signed distance to the boundary (negative inside), exact inside and outside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        let dx = (self.x_min - p[0]).max(p[0] - self.x_max);
        let dz = (self.z_min - p[1]).max(p[1] - self.z_max);
        if dx <= 0.0 && dz <= 0.0 {
            dx.max(dz)
        } else {
            dx.max(0.0).hypot(dz.max(0.0))
        }
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.x_min, self.x_max), p[1].clamp(self.z_min, self.z_max)]
    }
}

/// Absorbing-layer thickness on each side of the physical rectangle (km).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmlWidths {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
}

impl PmlWidths {
    pub fn uniform(w: f64) -> Self {
        PmlWidths { left: w, right: w, bottom: w, top: w }
    }

    /// Layer on the sides and bottom only, leaving the surface open.
    pub fn sides_and_bottom(w: f64) -> Self {
        PmlWidths { left: w, right: w, bottom: w, top: 0.0 }
    }
}

/// Physical rectangle `Ω₀` and the layer `Ω_PML` around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub physical: Rect,
    pub pml: PmlWidths,
}

impl Domain {
    pub fn new(physical: Rect, pml: PmlWidths) -> Self {
        Domain { physical, pml }
    }

    pub fn extended(&self) -> Rect {
        let p = &self.physical;
        Rect {
            x_min: p.x_min - self.pml.left,
            x_max: p.x_max + self.pml.right,
            z_min: p.z_min - self.pml.bottom,
            z_max: p.z_max + self.pml.top,
        }
    }

    pub fn region_of(&self, p: [f64; 2]) -> Region {
        if self.physical.contains(p, GEOM_TOL) {
            Region::Physical
        } else {
            Region::Pml
        }
    }

    /// Side of the extended rectangle closest to `p`.
    pub fn nearest_side(&self, p: [f64; 2]) -> Side {
        let r = self.extended();
        let d = [
            (p[0] - r.x_min).abs(),
            (r.x_max - p[0]).abs(),
            (p[1] - r.z_min).abs(),
            (r.z_max - p[1]).abs(),
        ];
        let sides = [Side::Left, Side::Right, Side::Bottom, Side::Top];
        let i = (0..4).min_by(|&a, &b| d[a].total_cmp(&d[b])).expect("four sides");
        sides[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Physical,
    Pml,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Physical => "physical",
            Region::Pml => "pml",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "physical" => Some(Region::Physical),
            "pml" => Some(Region::Pml),
            _ => None,
        }
    }
}

/// Boundary condition carried by an outer edge.
///
/// `FreeSurface` is the natural (zero-flux) condition and adds no boundary
/// term; `Absorbing` is the first-order non-reflecting condition
/// `∂u/∂t + c ∂u/∂n = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    FreeSurface,
    Absorbing,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::FreeSurface => "free_surface",
            BoundaryTag::Absorbing => "absorbing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "free_surface" => Some(BoundaryTag::FreeSurface),
            "absorbing" => Some(BoundaryTag::Absorbing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryKinds {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl BoundaryKinds {
    pub fn all(tag: BoundaryTag) -> Self {
        BoundaryKinds { left: tag, right: tag, bottom: tag, top: tag }
    }

    pub fn for_side(&self, side: Side) -> BoundaryTag {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }
}

impl Default for BoundaryKinds {
    fn default() -> Self {
        BoundaryKinds::all(BoundaryTag::Absorbing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub regions: Vec<Region>,
}

/// Sorted vertex pair identifying an undirected edge.
pub fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Assembles a mesh from raw connectivity: orients triangles
    /// counter-clockwise, tags regions against `domain` and tags every
    /// boundary edge by the side of the extended rectangle it lies on.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        domain: &Domain,
        kinds: BoundaryKinds,
    ) -> Result<Self> {
        for t in &mut triangles {
            if signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) < 0.0 {
                t.swap(1, 2);
            }
        }
        let regions = vertices.iter().map(|&p| domain.region_of(p)).collect();
        let mut mesh = Mesh { vertices, triangles, boundary: Vec::new(), regions };
        let counts = mesh.edge_counts()?;
        let mut boundary: Vec<BoundaryEdge> = Vec::new();
        for t in &mesh.triangles {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                if counts[&edge_key(a, b)] == 1 {
                    let va = mesh.vertices[a];
                    let vb = mesh.vertices[b];
                    let mid = [0.5 * (va[0] + vb[0]), 0.5 * (va[1] + vb[1])];
                    boundary.push(BoundaryEdge { vertices: [a, b], tag: kinds.for_side(domain.nearest_side(mid)) });
                }
            }
        }
        mesh.boundary = boundary;
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Number of triangles incident to every edge; errors if any edge has more than two.
    pub fn edge_counts(&self) -> Result<HashMap<(usize, usize), u8>> {
        let mut counts: HashMap<(usize, usize), u8> = HashMap::with_capacity(self.triangles.len() * 2);
        for (ti, t) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                let c = counts.entry(edge_key(t[i], t[(i + 1) % 3])).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(FwiError::NonConforming(format!(
                        "edge ({}, {}) of triangle {ti} is shared by more than two triangles",
                        t[i],
                        t[(i + 1) % 3]
                    )));
                }
            }
        }
        Ok(counts)
    }

    /// Unique undirected edges in first-seen order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for t in &self.triangles {
            for i in 0..3 {
                let key = edge_key(t[i], t[(i + 1) % 3]);
                if seen.insert(key, ()).is_none() {
                    out.push([key.0, key.1]);
                }
            }
        }
        out
    }

    /// Checks the structural invariants: valid indices, positive orientation,
    /// no duplicate vertices, conformity, and a tag on every boundary edge.
    pub fn validate(&self) -> Result<()> {
        let nv = self.n_vertices();
        if self.regions.len() != nv {
            return Err(FwiError::NonConforming("region tag count differs from vertex count".into()));
        }
        for (ti, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(FwiError::NonConforming(format!("triangle {ti} references a missing vertex")));
            }
            let det = 2.0 * self.area(ti);
            if det <= 0.0 {
                return Err(FwiError::InvertedElement { triangle: ti, det });
            }
        }
        let mut sorted: Vec<usize> = (0..nv).collect();
        sorted.sort_by(|&a, &b| {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
        });
        for w in sorted.windows(2) {
            let (pa, pb) = (self.vertices[w[0]], self.vertices[w[1]]);
            if (pa[0] - pb[0]).abs() <= 1e-12 && (pa[1] - pb[1]).abs() <= 1e-12 {
                return Err(FwiError::NonConforming(format!("vertices {} and {} coincide", w[0], w[1])));
            }
        }
        let counts = self.edge_counts()?;
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary {
            *tagged.entry(edge_key(e.vertices[0], e.vertices[1])).or_insert(0) += 1;
        }
        for (key, &c) in &counts {
            let n_tags = tagged.get(key).copied().unwrap_or(0);
            if c == 1 && n_tags != 1 {
                return Err(FwiError::NonConforming(format!("boundary edge {key:?} carries {n_tags} tags")));
            }
            if c == 2 && n_tags != 0 {
                return Err(FwiError::NonConforming(format!("interior edge {key:?} is tagged as boundary")));
            }
        }
        if tagged.keys().any(|k| !counts.contains_key(k)) {
            return Err(FwiError::NonConforming("boundary tag on an edge that is not in the mesh".into()));
        }
        Ok(())
    }

    /// Re-tags boundary edges side by side.
    pub fn retag_boundary(&mut self, domain: &Domain, kinds: BoundaryKinds) {
        for e in &mut self.boundary {
            let (a, b) = (self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]);
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            e.tag = kinds.for_side(domain.nearest_side(mid));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_signed_distance() {
        let r = Rect::new(0.0, 1.0, -1.0, 0.0);
        assert!((r.signed_distance([0.5, -0.5]) + 0.5).abs() < 1e-15);
        assert!((r.signed_distance([1.5, -0.5]) - 0.5).abs() < 1e-15);
        assert!((r.signed_distance([2.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn from_parts_orients_and_tags() {
        let domain = Domain::new(Rect::new(0.0, 1.0, 0.0, 1.0), PmlWidths::default());
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tris = vec![[0, 2, 1], [0, 2, 3]];
        let kinds = BoundaryKinds { top: BoundaryTag::FreeSurface, ..BoundaryKinds::default() };
        let m = Mesh::from_parts(verts, tris, &domain, kinds).unwrap();
        m.validate().unwrap();
        assert_eq!(m.boundary.len(), 4);
        let top: Vec<_> = m.boundary.iter().filter(|e| e.tag == BoundaryTag::FreeSurface).collect();
        assert_eq!(top.len(), 1);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn over_shared_edge_is_non_conforming() {
        let m = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 1.0]],
            triangles: vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]],
            boundary: vec![],
            regions: vec![Region::Physical; 5],
        };
        assert!(matches!(m.validate(), Err(FwiError::NonConforming(_))));
    }
}
