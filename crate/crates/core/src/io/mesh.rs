use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{FwiError, Result};
use crate::mesh::{BoundaryEdge, BoundaryTag, Mesh, Region};

pub(crate) const MESH_MAGIC: &str = "WLMESH1";

/// Mesh as ASCII text: header, vertex lines, triangle lines, then boundary-edge lines.
pub fn mesh_to_string(m: &Mesh) -> String {
    let mut s = String::with_capacity(40 * (m.n_vertices() + m.n_triangles()));
    let _ = writeln!(s, "{MESH_MAGIC} {} {}", m.n_vertices(), m.n_triangles());
    for (v, r) in m.vertices.iter().zip(&m.regions) {
        let _ = writeln!(s, "{:e} {:e} {}", v[0], v[1], r.as_str());
    }
    for t in &m.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for e in &m.boundary {
        let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.tag.as_str());
    }
    s
}

pub fn write_mesh(path: &Path, m: &Mesh) -> Result<()> {
    fs::write(path, mesh_to_string(m))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = fs::read_to_string(path)?;
    parse_mesh(&text).map_err(|msg| FwiError::Format { path: path.to_path_buf(), msg })
}

fn parse_mesh(text: &str) -> std::result::Result<Mesh, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("empty file")?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 || h[0] != MESH_MAGIC {
        return Err(format!("expected header `{MESH_MAGIC} nv nt`, got `{header}`"));
    }
    let nv: usize = h[1].parse().map_err(|_| format!("bad vertex count `{}`", h[1]))?;
    let nt: usize = h[2].parse().map_err(|_| format!("bad triangle count `{}`", h[2]))?;
    let mut vertices = Vec::with_capacity(nv);
    let mut regions = Vec::with_capacity(nv);
    let mut triangles = Vec::with_capacity(nt);
    let mut boundary = Vec::new();
    let index = |s: &str, no: usize| s.parse::<usize>().map_err(|_| format!("line {}: bad index `{s}`", no + 1));
    for (no, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() != 3 {
            return Err(format!("line {}: expected 3 fields, found {}", no + 1, f.len()));
        }
        if vertices.len() < nv {
            let x: f64 = f[0].parse().map_err(|_| format!("line {}: bad coordinate `{}`", no + 1, f[0]))?;
            let z: f64 = f[1].parse().map_err(|_| format!("line {}: bad coordinate `{}`", no + 1, f[1]))?;
            let r = Region::parse(f[2]).ok_or_else(|| format!("line {}: unknown region `{}`", no + 1, f[2]))?;
            vertices.push([x, z]);
            regions.push(r);
        } else if triangles.len() < nt {
            triangles.push([index(f[0], no)?, index(f[1], no)?, index(f[2], no)?]);
        } else {
            let tag = BoundaryTag::parse(f[2]).ok_or_else(|| format!("line {}: unknown boundary tag `{}`", no + 1, f[2]))?;
            boundary.push(BoundaryEdge { vertices: [index(f[0], no)?, index(f[1], no)?], tag });
        }
    }
    if vertices.len() < nv || triangles.len() < nt {
        return Err(format!(
            "file ends after {} of {nv} vertices and {} of {nt} triangles",
            vertices.len(),
            triangles.len()
        ));
    }
    let m = Mesh { vertices, triangles, boundary, regions };
    m.validate().map_err(|e| e.to_string())?;
    Ok(m)
}
