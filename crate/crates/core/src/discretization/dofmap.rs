use std::collections::HashMap;

use crate::elements::{ElementDef, NodeKind, EDGE_VERTICES};
use crate::error::{FwiError, Result};
use crate::mesh::{edge_key, Mesh, Region};

const PARAM_TOL: f64 = 1e-9;

/// Global numbering of the continuous nodal space.
///
/// Vertex DoFs come first and share the mesh vertex index, then the
/// edge-interior DoFs edge by edge, then the element-interior DoFs.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub n_dofs: usize,
    pub nodes_per_element: usize,
    /// Row-major `n_triangles × nodes_per_element`, local order as in the element.
    pub cells: Vec<usize>,
    pub coords: Vec<[f64; 2]>,
    pub regions: Vec<Region>,
    /// Edge-interior node parameters measured from the lower-numbered vertex.
    pub edge_params: Vec<f64>,
    /// First edge-interior DoF of each edge, keyed by its sorted vertex pair.
    pub edge_base: HashMap<(usize, usize), usize>,
}

impl DofMap {
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.cells[t * self.nodes_per_element..(t + 1) * self.nodes_per_element]
    }

    pub fn n_elements(&self) -> usize {
        self.cells.len() / self.nodes_per_element.max(1)
    }

    /// DoFs lying on edge `(a, b)` paired with their parameter along `a → b`.
    pub fn edge_dofs(&self, a: usize, b: usize) -> Option<Vec<(usize, f64)>> {
        let base = if self.edge_params.is_empty() { 0 } else { *self.edge_base.get(&edge_key(a, b))? };
        let mut out = vec![(a, 0.0), (b, 1.0)];
        for (k, &s) in self.edge_params.iter().enumerate() {
            out.push((base + k, if a < b { s } else { 1.0 - s }));
        }
        Some(out)
    }
}

pub(crate) fn affine(p: [[f64; 2]; 3], xi: [f64; 2]) -> [f64; 2] {
    [
        p[0][0] + xi[0] * (p[1][0] - p[0][0]) + xi[1] * (p[2][0] - p[0][0]),
        p[0][1] + xi[0] * (p[1][1] - p[0][1]) + xi[1] * (p[2][1] - p[0][1]),
    ]
}

pub fn build_dofmap(mesh: &Mesh, el: &ElementDef) -> Result<DofMap> {
    mesh.edge_counts()?;
    let nv = mesh.n_vertices();
    let mut used = vec![false; nv];
    for t in &mesh.triangles {
        for &v in t {
            if v >= nv {
                return Err(FwiError::NonConforming(format!("triangle references missing vertex {v}")));
            }
            used[v] = true;
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(FwiError::NonConforming(format!("vertex {v} belongs to no triangle")));
    }

    let mut edge_params: Vec<f64> = el
        .kinds
        .iter()
        .filter_map(|k| match k {
            NodeKind::Edge { edge: 0, t } => Some(*t),
            _ => None,
        })
        .collect();
    edge_params.sort_by(f64::total_cmp);
    let npe = el.n_nodes();
    let ne = el.nodes_per_edge();
    let mut coords: Vec<[f64; 2]> = mesh.vertices.clone();
    let mut regions: Vec<Region> = mesh.regions.clone();
    let mut edge_base: HashMap<(usize, usize), usize> = HashMap::new();
    let mut cells = Vec::with_capacity(mesh.n_triangles() * npe);
    let mut next = nv;
    let all_physical = |vs: &[usize]| {
        if vs.iter().all(|&v| mesh.regions[v] == Region::Physical) {
            Region::Physical
        } else {
            Region::Pml
        }
    };

    for (ti, tri) in mesh.triangles.iter().enumerate() {
        let pts = mesh.triangle_points(ti);
        for (q, kind) in el.kinds.iter().enumerate() {
            let (dof, region) = match *kind {
                NodeKind::Vertex(v) => (tri[v], mesh.regions[tri[v]]),
                NodeKind::Edge { edge, t } => {
                    let (a, b) = (tri[EDGE_VERTICES[edge][0]], tri[EDGE_VERTICES[edge][1]]);
                    let s = if a < b { t } else { 1.0 - t };
                    let k = edge_params
                        .iter()
                        .position(|&e| (e - s).abs() < PARAM_TOL)
                        .ok_or_else(|| FwiError::NonConforming(format!("edge node parameter {s} has no global slot")))?;
                    let base = *edge_base.entry(edge_key(a, b)).or_insert_with(|| {
                        let base = next;
                        next += ne;
                        base
                    });
                    (base + k, all_physical(&[a, b]))
                }
                NodeKind::Interior => {
                    next += 1;
                    (next - 1, all_physical(tri))
                }
            };
            if dof >= coords.len() {
                coords.resize(next, [f64::NAN; 2]);
                regions.resize(next, Region::Pml);
            }
            if dof >= nv && coords[dof][0].is_nan() {
                coords[dof] = affine(pts, el.nodes[q]);
                regions[dof] = region;
            }
            cells.push(dof);
        }
    }
    coords.resize(next, [f64::NAN; 2]);
    regions.resize(next, Region::Pml);
    Ok(DofMap { n_dofs: next, nodes_per_element: npe, cells, coords, regions, edge_params, edge_base })
}
