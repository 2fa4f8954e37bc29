//! Two-dimensional time-domain full waveform inversion on waveform-adapted
//! triangular meshes with mass-lumped KMV elements of degree 1 to 3, a
//! perfectly matched layer, a discrete adjoint gradient and projected L-BFGS.
//!
//! The numerical core is generic over the scalar type; the aliases below fix
//! it to `f64` (or `f32` for single-precision runs).

pub mod adjoint;
pub mod discretization;
pub mod elements;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod inversion;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod propagator;
pub mod scalar;

pub use error::{FwiError, Result};
pub use scalar::{Rational, Real};

pub type Space64 = discretization::Space<f64>;
pub type FieldSetup64 = discretization::FieldSetup<f64>;
pub type ShotRecord64 = propagator::ShotRecord<f64>;
pub type StateSnapshots64 = propagator::StateSnapshots<f64>;
pub type GradientField64 = adjoint::GradientField<f64>;
pub type InversionState64 = inversion::InversionState<f64>;

pub type Space32 = discretization::Space<f32>;
pub type FieldSetup32 = discretization::FieldSetup<f32>;
pub type ShotRecord32 = propagator::ShotRecord<f32>;
