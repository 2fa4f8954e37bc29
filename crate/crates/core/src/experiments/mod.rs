//! End-to-end experiments shared by the command-line tool and the acceptance suite.

pub mod stability;
pub mod fwi;
pub mod gradcheck;
pub mod mms;
pub mod sweep;

use std::sync::Arc;

use crate::discretization::{estimate_dt_cfl, FieldSetup, PmlSpec, Space};
use crate::error::Result;
use crate::grid::Grid2;
use crate::io::{read_velocity, MeshKind, RunConfig, VelocityModel};
use crate::mesh::{generate_mesh, gradation_limit, sizing_from_velocity, structured_mesh, BoundaryKinds, Domain, Mesh, MeshOptions, PmlWidths};
use crate::propagator::ShotConfig;

pub fn domain_of(cfg: &RunConfig) -> Domain {
    let w = cfg.pml_width;
    Domain::new(cfg.domain, PmlWidths { left: w, right: w, bottom: w, top: cfg.pml_top_width })
}

pub fn boundary_kinds(cfg: &RunConfig) -> BoundaryKinds {
    BoundaryKinds { top: cfg.top, ..BoundaryKinds::default() }
}

/// Raster over the physical rectangle with roughly 10 m spacing.
fn model_grid(cfg: &RunConfig) -> Result<Grid2> {
    let r = &cfg.domain;
    let h = (r.width().max(r.height()) / 400.0).min(0.01);
    Grid2::covering(r.x_min, r.x_max, r.z_min, r.z_max, h)
}

/// Target model: the configured raster, or water over a background with an
/// optional lower layer and a circular anomaly.
pub fn true_model(cfg: &RunConfig) -> Result<VelocityModel> {
    if let Some(p) = &cfg.model_file {
        return read_velocity(p);
    }
    let [ax, az] = cfg.anomaly_center;
    VelocityModel::from_fn(model_grid(cfg)?, |x, z| {
        if z > -cfg.water_depth {
            return cfg.water_velocity;
        }
        let base = match cfg.layer_z {
            Some(lz) if z < lz => cfg.layer_velocity,
            _ => cfg.background,
        };
        if cfg.anomaly_radius > 0.0 && (x - ax).hypot(z - az) < cfg.anomaly_radius {
            base * (1.0 + cfg.anomaly_contrast)
        } else {
            base
        }
    })
}

/// Start model for inversion: the water layer over a uniform `start_velocity`.
pub fn start_model(cfg: &RunConfig) -> Result<VelocityModel> {
    VelocityModel::from_fn(model_grid(cfg)?, |_, z| if z > -cfg.water_depth { cfg.water_velocity } else { cfg.start_velocity })
}

/// Structured mesh of size `mesh.h`, or a waveform-adapted mesh sized from `vm`.
pub fn build_mesh(cfg: &RunConfig, vm: &VelocityModel) -> Result<Mesh> {
    let domain = domain_of(cfg);
    let kinds = boundary_kinds(cfg);
    match cfg.mesh_kind {
        MeshKind::Structured => structured_mesh(&domain, cfg.mesh_h, kinds),
        MeshKind::Adapted => {
            let mut sf = sizing_from_velocity(vm, cfg.frequency, cfg.cells_per_wavelength, cfg.min_size)?;
            sf.gradation_rate = cfg.gradation;
            let sf = gradation_limit(&sf)?;
            generate_mesh(&domain, &sf, cfg.seed, &MeshOptions { boundary: kinds, ..MeshOptions::default() })
        }
    }
}

/// Function space with damping profiles tuned to `c_ref`.
pub fn build_space(cfg: &RunConfig, mesh: Mesh, c_ref: f64) -> Result<Arc<Space<f64>>> {
    let pml = PmlSpec::new(domain_of(cfg), c_ref)?;
    Ok(Arc::new(Space::new(mesh, cfg.degree, pml)?))
}

/// Stable step for wavespeeds up to `c_max`: the configured `time.dt`, or
/// `cfl_safety` times the spectral estimate.
pub fn choose_dt(cfg: &RunConfig, space: &Arc<Space<f64>>, c_max: f64) -> Result<f64> {
    match cfg.dt {
        Some(dt) => Ok(dt),
        None => Ok(cfg.cfl_safety * cfl_limit(space, c_max)?),
    }
}

/// Spectral CFL limit with a uniform wavespeed `c`.
pub fn cfl_limit(space: &Arc<Space<f64>>, c: f64) -> Result<f64> {
    let fs = FieldSetup::new(space.clone(), vec![c; space.n_dofs()])?;
    Ok(estimate_dt_cfl(&fs))
}

/// One shot per configured source, all sharing the receiver line.
pub fn shots(cfg: &RunConfig, dt: f64) -> Vec<ShotConfig> {
    let receivers = cfg.receivers();
    cfg.sources
        .iter()
        .map(|&source| ShotConfig {
            source,
            frequency: cfg.frequency,
            amplitude: cfg.amplitude,
            receivers: receivers.clone(),
            duration: cfg.duration,
            dt,
            subsample: cfg.subsample,
        })
        .collect()
}
