use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FwiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FwiError {
    #[error("unsupported degree {0}: KMV triangles are available for degrees 1-3 only")]
    UnsupportedDegree(u32),

    #[error("quadrature construction failed: {0}")]
    Quadrature(String),

    #[error("point ({x}, {z}) lies outside {what}")]
    PointOutside { x: f64, z: f64, what: &'static str },

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("triangle {triangle} has non-positive Jacobian {det:e}")]
    InvertedElement { triangle: usize, det: f64 },

    #[error("mesh quality targets not met: {0}")]
    MeshQuality(String),

    #[error("solution became non-finite at step {step}")]
    Unstable { step: usize },

    #[error("misfit evaluated to {value} at iteration {iteration}")]
    NonFiniteMisfit { iteration: usize, value: f64 },

    #[error("line search failed: {0}")]
    LineSearch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("config {path}:{line}: {msg}")]
    Config { path: PathBuf, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FwiError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FwiError::InvalidInput(msg.into())
    }
}
