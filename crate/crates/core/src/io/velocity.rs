use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{FwiError, Result};
use crate::grid::Grid2;

pub(crate) const VELOCITY_MAGIC: &str = "WLVM1";

/// Regular raster of P-wavespeeds in km/s.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    pub grid: Grid2,
    pub values: Vec<f64>,
}

impl VelocityModel {
    pub fn new(grid: Grid2, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FwiError::invalid(format!(
                "velocity raster holds {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(FwiError::invalid(format!("velocity sample {i} is {} (must be finite and > 0)", values[i])));
        }
        Ok(VelocityModel { grid, values })
    }

    pub fn uniform(grid: Grid2, c: f64) -> Result<Self> {
        VelocityModel::new(grid, vec![c; grid.len()])
    }

    /// Samples `f(x, z)` on every grid point.
    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                let [x, z] = grid.coord(i, j);
                values.push(f(x, z));
            }
        }
        VelocityModel::new(grid, values)
    }

    pub fn sample(&self, x: f64, z: f64) -> f64 {
        self.grid.sample(&self.values, [x, z])
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn write_velocity(path: &Path, vm: &VelocityModel) -> Result<()> {
    let g = &vm.grid;
    let mut buf = format!(
        "{VELOCITY_MAGIC} {} {} {:e} {:e} {:e} {:e}\n",
        g.nx, g.nz, g.origin[0], g.origin[1], g.spacing[0], g.spacing[1]
    )
    .into_bytes();
    buf.reserve(vm.values.len() * 8);
    for v in &vm.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_velocity(path: &Path) -> Result<VelocityModel> {
    let bytes = fs::read(path)?;
    let fmt = |msg: String| FwiError::Format { path: path.to_path_buf(), msg };
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| fmt("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| fmt("header is not ASCII".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 7 || fields[0] != VELOCITY_MAGIC {
        return Err(fmt(format!("expected header `{VELOCITY_MAGIC} nx nz x0 z0 dx dz`, got `{header}`")));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| fmt(format!("bad integer `{s}` in header")));
    let real = |s: &str| s.parse::<f64>().map_err(|_| fmt(format!("bad number `{s}` in header")));
    let (nx, nz) = (int(fields[1])?, int(fields[2])?);
    let origin = [real(fields[3])?, real(fields[4])?];
    let spacing = [real(fields[5])?, real(fields[6])?];
    let grid = Grid2::new(nx, nz, origin, spacing).map_err(|e| fmt(e.to_string()))?;
    let z_top = origin[1] + (nz - 1) as f64 * spacing[1];
    if z_top > 1e-9 {
        return Err(fmt(format!("raster reaches z = {z_top} km; depth axis must satisfy z <= 0")));
    }
    let payload = &bytes[nl + 1..];
    let expected = grid.len() * 8;
    if payload.len() != expected {
        return Err(fmt(format!("payload holds {} bytes, expected {expected}", payload.len())));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    VelocityModel::new(grid, values).map_err(|e| fmt(e.to_string()))
}
