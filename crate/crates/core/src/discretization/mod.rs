//! Discrete space: DoF numbering, lumped mass and damping, matrix-free
//! operators, stability estimate and point interpolation.

mod cfl;
mod dofmap;
mod interp;
mod operators;
mod pml;
mod setup;

pub use cfl::{estimate_dt_cfl, spectral_radius_bound};
pub use dofmap::{build_dofmap, DofMap};
pub use interp::{locate, PointInterpolator};
pub use operators::{apply_stiffness, assemble_dense_mass, assemble_stiffness, CsrMatrix};
pub use pml::{pml_profiles, sigma_max_for, PmlSpec, DEFAULT_REFLECTION};
pub use setup::{interpolate_velocity, water_flags, ElementGeometry, FieldSetup, Space, WATER_THRESHOLD};
