use std::sync::Arc;

use crate::elements::{kmv_element, ElementDef};
use crate::error::{FwiError, Result};
use crate::io::VelocityModel;
use crate::mesh::{BoundaryTag, Mesh};
use crate::scalar::Real;

use super::dofmap::{build_dofmap, DofMap};
use super::pml::{pml_profiles, PmlSpec};

/// Affine map data of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry<T> {
    /// Jacobian determinant, twice the triangle area.
    pub det: T,
    /// Inverse-transpose Jacobian mapping reference gradients to physical ones.
    pub jinv_t: [[T; 2]; 2],
}

/// Everything about the discrete space that does not depend on the wavespeed.
#[derive(Debug, Clone)]
pub struct Space<T: Real> {
    pub mesh: Mesh,
    pub element: ElementDef,
    pub dofmap: DofMap,
    pub pml: PmlSpec,
    pub geometry: Vec<ElementGeometry<T>>,
    /// Lumped mass `M_u`.
    pub mass: Vec<T>,
    pub sigma_x: Vec<T>,
    pub sigma_z: Vec<T>,
    /// `M (σ_x + σ_z)`, the first-order damping of the pressure equation.
    pub mass_damping: Vec<T>,
    /// `M σ_x σ_z`, the zeroth-order term of the pressure equation.
    pub mass_reaction: Vec<T>,
    /// Lumped `∫ φ ds` over absorbing boundary edges; `B = c ⊙ boundary_weight`.
    pub boundary_weight: Vec<T>,
    /// Elements touching a DoF with non-zero damping.
    pub pml_elements: Vec<usize>,
    pub(crate) weights: Vec<T>,
    /// `grad_ref[q * n + i]`: reference gradient of basis `i` at node `q`.
    pub(crate) grad_ref: Vec<[T; 2]>,
}

impl<T: Real> Space<T> {
    pub fn new(mesh: Mesh, degree: u32, pml: PmlSpec) -> Result<Self> {
        let element = kmv_element(degree)?;
        let dofmap = build_dofmap(&mesh, &element)?;
        let mut geometry = Vec::with_capacity(mesh.n_triangles());
        for t in 0..mesh.n_triangles() {
            let [a, b, c] = mesh.triangle_points(t);
            let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det > 0.0) {
                return Err(FwiError::InvertedElement { triangle: t, det });
            }
            // (J^-1)^T = [[d, -c], [-b, a]] / det for J = [[a, b], [c, d]]
            let jinv_t = [
                [T::lit(j[1][1] / det), T::lit(-j[1][0] / det)],
                [T::lit(-j[0][1] / det), T::lit(j[0][0] / det)],
            ];
            geometry.push(ElementGeometry { det: T::lit(det), jinv_t });
        }
        let weights: Vec<T> = element.weights.iter().map(|&w| T::lit(w)).collect();
        let grad_ref =
            element.gradient_tabulation().into_iter().flatten().map(|g| [T::lit(g[0]), T::lit(g[1])]).collect();

        let nd = dofmap.n_dofs;
        let mut mass = vec![T::zero(); nd];
        for (t, g) in geometry.iter().enumerate() {
            for (q, &d) in dofmap.element_dofs(t).iter().enumerate() {
                mass[d] += weights[q] * g.det;
            }
        }
        if let Some(d) = mass.iter().position(|m| !(*m > T::zero())) {
            return Err(FwiError::NonConforming(format!("DoF {d} has non-positive lumped mass")));
        }

        let (sx, sz) = pml_profiles(&pml, &dofmap.coords);
        let sigma_x: Vec<T> = sx.iter().map(|&s| T::lit(s)).collect();
        let sigma_z: Vec<T> = sz.iter().map(|&s| T::lit(s)).collect();
        let mass_damping = (0..nd).map(|d| mass[d] * (sigma_x[d] + sigma_z[d])).collect();
        let mass_reaction = (0..nd).map(|d| mass[d] * sigma_x[d] * sigma_z[d]).collect();
        let damped: Vec<bool> = (0..nd).map(|d| sx[d] > 0.0 || sz[d] > 0.0).collect();
        let pml_elements =
            (0..mesh.n_triangles()).filter(|&t| dofmap.element_dofs(t).iter().any(|&d| damped[d])).collect();

        let mut boundary_weight = vec![T::zero(); nd];
        let rule = &element.edge_rule;
        for e in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::Absorbing) {
            let [a, b] = e.vertices;
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
            let nodes = dofmap
                .edge_dofs(a, b)
                .ok_or_else(|| FwiError::NonConforming(format!("boundary edge ({a}, {b}) is not a mesh edge")))?;
            for (d, t) in nodes {
                let w = rule
                    .iter()
                    .find(|(s, _)| (s - t).abs() < 1e-9)
                    .map(|&(_, w)| w)
                    .ok_or_else(|| FwiError::NonConforming(format!("no edge weight at parameter {t}")))?;
                boundary_weight[d] += T::lit(w * len);
            }
        }

        Ok(Space {
            mesh,
            element,
            dofmap,
            pml,
            geometry,
            mass,
            sigma_x,
            sigma_z,
            mass_damping,
            mass_reaction,
            boundary_weight,
            pml_elements,
            weights,
            grad_ref,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_dofs
    }

    pub fn n_elements(&self) -> usize {
        self.geometry.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.dofmap.nodes_per_element
    }

    /// `α(P) = sqrt(n_DoF / n_e)`, the DoF-density coefficient of the space.
    pub fn dof_density(&self) -> f64 {
        (self.n_dofs() as f64 / self.n_elements() as f64).sqrt()
    }
}

/// A space together with a nodal wavespeed.
#[derive(Debug, Clone)]
pub struct FieldSetup<T: Real> {
    pub space: Arc<Space<T>>,
    pub c: Vec<T>,
    pub(crate) c2: Vec<T>,
    /// Lumped absorbing-boundary damping `B`.
    pub boundary: Vec<T>,
}

impl<T: Real> FieldSetup<T> {
    pub fn new(space: Arc<Space<T>>, c: Vec<T>) -> Result<Self> {
        if c.len() != space.n_dofs() {
            return Err(FwiError::invalid(format!("wavespeed has {} values, space has {} DoFs", c.len(), space.n_dofs())));
        }
        if let Some(d) = c.iter().position(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(FwiError::invalid(format!("wavespeed at DoF {d} is {}", c[d])));
        }
        let c2 = c.iter().map(|&v| v * v).collect();
        let boundary = c.iter().zip(&space.boundary_weight).map(|(&v, &w)| v * w).collect();
        Ok(FieldSetup { space, c, c2, boundary })
    }

    /// Same space, different wavespeed.
    pub fn with_velocity(&self, c: Vec<T>) -> Result<Self> {
        FieldSetup::new(Arc::clone(&self.space), c)
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }
}

/// Bilinear samples of the raster at DoF coordinates, clamped to its extent.
pub fn interpolate_velocity<T: Real>(vm: &VelocityModel, dofmap: &DofMap) -> Vec<T> {
    dofmap.coords.iter().map(|p| T::lit(vm.sample(p[0], p[1]))).collect()
}

/// Nodal flag for DoFs whose wavespeed lies below `threshold` (water).
pub fn water_flags<T: Real>(c: &[T], threshold: f64) -> Vec<bool> {
    c.iter().map(|v| v.as_f64() < threshold).collect()
}

/// Wavespeed below which a DoF counts as water (km/s).
pub const WATER_THRESHOLD: f64 = 1.51;
