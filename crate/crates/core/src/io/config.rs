use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{FwiError, Result};
use crate::mesh::{BoundaryTag, Rect};

/// Every key the parser accepts.
pub const KNOWN_KEYS: &[&str] = &[
    "domain.xmin",
    "domain.xmax",
    "domain.zmin",
    "domain.zmax",
    "pml.width",
    "pml.top_width",
    "boundary.top",
    "element.degree",
    "source.frequency",
    "source.amplitude",
    "source.x",
    "source.z",
    "receivers.count",
    "receivers.x_start",
    "receivers.x_end",
    "receivers.z",
    "mesh.kind",
    "mesh.c",
    "mesh.h",
    "mesh.min_size",
    "mesh.gradation",
    "time.duration",
    "time.dt",
    "time.cfl_safety",
    "time.subsample",
    "model.file",
    "model.background",
    "model.water_depth",
    "model.water_velocity",
    "model.anomaly_x",
    "model.anomaly_z",
    "model.anomaly_radius",
    "model.anomaly_contrast",
    "model.layer_z",
    "model.layer_velocity",
    "inversion.lower",
    "inversion.upper",
    "inversion.iter_max",
    "inversion.tol",
    "inversion.start",
    "inversion.memory",
    "inversion.first_step",
    "gradcheck.steps",
    "mms.sizes",
    "mms.degrees",
    "mms.duration",
    "mms.dt",
    "sweep.degrees",
    "sweep.c_values",
    "sweep.reference_g",
    "sweep.target_error",
    "sweep.bisections",
    "run.seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    /// Waveform-adapted unstructured mesh.
    Adapted,
    /// Uniform right-triangle mesh of size `mesh.h`.
    Structured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Rect,
    /// Layer width on the left, right and bottom sides.
    pub pml_width: f64,
    pub pml_top_width: f64,
    pub top: BoundaryTag,
    pub degree: u32,
    pub frequency: f64,
    pub amplitude: f64,
    pub sources: Vec<[f64; 2]>,
    pub receiver_count: usize,
    pub receiver_x: [f64; 2],
    pub receiver_z: f64,
    pub mesh_kind: MeshKind,
    /// Cells per wavelength `C`.
    pub cells_per_wavelength: f64,
    pub mesh_h: f64,
    pub min_size: f64,
    pub gradation: f64,
    pub duration: f64,
    pub dt: Option<f64>,
    pub cfl_safety: f64,
    pub subsample: usize,
    pub model_file: Option<PathBuf>,
    pub background: f64,
    pub water_depth: f64,
    pub water_velocity: f64,
    pub anomaly_center: [f64; 2],
    pub anomaly_radius: f64,
    /// Relative perturbation, `0.2` for +20%.
    pub anomaly_contrast: f64,
    /// Depth below which `layer_velocity` replaces the background.
    pub layer_z: Option<f64>,
    pub layer_velocity: f64,
    pub lower: f64,
    pub upper: f64,
    pub iter_max: usize,
    pub tol: f64,
    pub start_velocity: f64,
    pub memory: usize,
    pub first_step: f64,
    pub gradcheck_steps: Vec<f64>,
    pub mms_sizes: Vec<f64>,
    pub mms_degrees: Vec<u32>,
    pub mms_duration: f64,
    pub mms_dt: f64,
    pub sweep_degrees: Vec<u32>,
    pub sweep_c_values: Vec<f64>,
    pub sweep_reference_g: f64,
    pub sweep_target_error: f64,
    pub sweep_bisections: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    /// Toy inversion setup: 1 km square with a 100 m water layer, a +20%
    /// disc in a 2 km/s background, four sources and 50 bottom receivers.
    fn default() -> Self {
        RunConfig {
            domain: Rect::new(0.0, 1.0, -1.0, 0.0),
            pml_width: 0.2,
            pml_top_width: 0.0,
            top: BoundaryTag::FreeSurface,
            degree: 2,
            frequency: 8.0,
            amplitude: 1.0,
            sources: vec![[0.2, -0.05], [0.4, -0.05], [0.6, -0.05], [0.8, -0.05]],
            receiver_count: 50,
            receiver_x: [0.01, 0.99],
            receiver_z: -0.95,
            mesh_kind: MeshKind::Adapted,
            cells_per_wavelength: 3.0,
            mesh_h: 0.025,
            min_size: 0.02,
            gradation: 0.15,
            duration: 1.0,
            dt: None,
            cfl_safety: 0.7,
            subsample: 2,
            model_file: None,
            background: 2.0,
            water_depth: 0.1,
            water_velocity: 1.5,
            anomaly_center: [0.5, -0.55],
            anomaly_radius: 0.2,
            anomaly_contrast: 0.2,
            layer_z: None,
            layer_velocity: 1.0,
            lower: 1.0,
            upper: 5.0,
            iter_max: 50,
            tol: 1e-10,
            start_velocity: 2.0,
            memory: 10,
            first_step: 0.1,
            gradcheck_steps: vec![1e-3, 1e-4, 1e-5],
            mms_sizes: vec![0.1, 0.05, 0.025],
            mms_degrees: vec![2, 3],
            mms_duration: 0.1,
            mms_dt: 2.5e-4,
            sweep_degrees: vec![2, 3],
            sweep_c_values: vec![1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.0],
            sweep_reference_g: 15.0,
            sweep_target_error: 5.0,
            sweep_bisections: 3,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Receiver positions spread evenly over `[x_start, x_end]` at depth `z`.
    pub fn receivers(&self) -> Vec<[f64; 2]> {
        let n = self.receiver_count;
        let [a, b] = self.receiver_x;
        (0..n)
            .map(|i| {
                let t = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                [a + t * (b - a), self.receiver_z]
            })
            .collect()
    }
}

/// `section.key = value` pairs with their line numbers; `#` starts a comment.
pub fn parse_pairs(text: &str, path: &Path) -> Result<BTreeMap<String, (String, usize)>> {
    let err = |line: usize, msg: String| FwiError::Config { path: path.to_path_buf(), line, msg };
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err(no, format!("expected `section.key = value`, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !k.contains('.') || k.starts_with('.') || k.ends_with('.') {
            return Err(err(no, format!("key `{k}` is not of the form section.key")));
        }
        if !KNOWN_KEYS.contains(&k) {
            return Err(err(no, format!("unknown key `{k}`")));
        }
        if v.is_empty() {
            return Err(err(no, format!("key `{k}` has no value")));
        }
        if let Some((_, first)) = out.insert(k.to_string(), (v.to_string(), no)) {
            return Err(err(no, format!("key `{k}` repeats line {first}")));
        }
    }
    Ok(out)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_over(path, RunConfig::default())
}

/// Reads a config file whose keys override `base`.
pub fn parse_config_over(path: &Path, base: RunConfig) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    parse_config_text(&text, path, base)
}

/// Parses config text over the default settings; `path` only labels errors.
pub fn parse_config_str(text: &str, path: &Path) -> Result<RunConfig> {
    parse_config_text(text, path, RunConfig::default())
}

/// Parses config text over `base`.
pub fn parse_config_text(text: &str, path: &Path, base: RunConfig) -> Result<RunConfig> {
    let pairs = parse_pairs(text, path)?;
    let mut c = base;
    let err = |line: usize, msg: String| FwiError::Config { path: path.to_path_buf(), line, msg };
    for (key, (v, line)) in &pairs {
        let line = *line;
        let real = || -> Result<f64> {
            v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| err(line, format!("`{key}` needs a number, got `{v}`")))
        };
        let positive = || -> Result<f64> {
            let x = real()?;
            if x > 0.0 {
                Ok(x)
            } else {
                Err(err(line, format!("`{key}` must be positive, got {x}")))
            }
        };
        let count = || -> Result<usize> { v.parse::<usize>().map_err(|_| err(line, format!("`{key}` needs a non-negative integer, got `{v}`"))) };
        let reals = || -> Result<Vec<f64>> {
            v.split(',')
                .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| err(line, format!("`{key}` needs a comma-separated list of numbers, got `{v}`")))
        };
        let degree = |d: &str| -> Result<u32> {
            let d: u32 = d.trim().parse().map_err(|_| err(line, format!("`{key}` needs an integer degree, got `{d}`")))?;
            if (1..=3).contains(&d) {
                Ok(d)
            } else {
                Err(err(line, format!("unsupported degree {d}: only KMV degrees 1-3 are available")))
            }
        };
        let degrees = || -> Result<Vec<u32>> { v.split(',').map(degree).collect() };
        match key.as_str() {
            "domain.xmin" => c.domain.x_min = real()?,
            "domain.xmax" => c.domain.x_max = real()?,
            "domain.zmin" => c.domain.z_min = real()?,
            "domain.zmax" => c.domain.z_max = real()?,
            "pml.width" => c.pml_width = real()?,
            "pml.top_width" => c.pml_top_width = real()?,
            "boundary.top" => {
                c.top = BoundaryTag::parse(v).ok_or_else(|| err(line, format!("`{key}` must be free_surface or absorbing, got `{v}`")))?
            }
            "element.degree" => c.degree = degree(v)?,
            "source.frequency" => c.frequency = positive()?,
            "source.amplitude" => c.amplitude = real()?,
            "source.x" | "source.z" => {}
            "receivers.count" => c.receiver_count = count()?,
            "receivers.x_start" => c.receiver_x[0] = real()?,
            "receivers.x_end" => c.receiver_x[1] = real()?,
            "receivers.z" => c.receiver_z = real()?,
            "mesh.kind" => {
                c.mesh_kind = match v.as_str() {
                    "adapted" => MeshKind::Adapted,
                    "structured" => MeshKind::Structured,
                    _ => return Err(err(line, format!("`{key}` must be adapted or structured, got `{v}`"))),
                }
            }
            "mesh.c" => c.cells_per_wavelength = positive()?,
            "mesh.h" => c.mesh_h = positive()?,
            "mesh.min_size" => c.min_size = positive()?,
            "mesh.gradation" => c.gradation = positive()?,
            "time.duration" => c.duration = positive()?,
            "time.dt" => c.dt = Some(positive()?),
            "time.cfl_safety" => c.cfl_safety = positive()?,
            "time.subsample" => {
                c.subsample = count()?;
                if c.subsample == 0 {
                    return Err(err(line, "`time.subsample` must be at least 1".into()));
                }
            }
            "model.file" => c.model_file = Some(resolve(path, v)),
            "model.background" => c.background = positive()?,
            "model.water_depth" => c.water_depth = real()?,
            "model.water_velocity" => c.water_velocity = positive()?,
            "model.anomaly_x" => c.anomaly_center[0] = real()?,
            "model.anomaly_z" => c.anomaly_center[1] = real()?,
            "model.anomaly_radius" => c.anomaly_radius = real()?,
            "model.anomaly_contrast" => c.anomaly_contrast = real()?,
            "model.layer_z" => c.layer_z = Some(real()?),
            "model.layer_velocity" => c.layer_velocity = positive()?,
            "inversion.lower" => c.lower = positive()?,
            "inversion.upper" => c.upper = positive()?,
            "inversion.iter_max" => c.iter_max = count()?,
            "inversion.tol" => c.tol = real()?,
            "inversion.start" => c.start_velocity = positive()?,
            "inversion.memory" => c.memory = count()?,
            "inversion.first_step" => c.first_step = positive()?,
            "gradcheck.steps" => c.gradcheck_steps = reals()?,
            "mms.sizes" => c.mms_sizes = reals()?,
            "mms.degrees" => c.mms_degrees = degrees()?,
            "mms.duration" => c.mms_duration = positive()?,
            "mms.dt" => c.mms_dt = positive()?,
            "sweep.degrees" => c.sweep_degrees = degrees()?,
            "sweep.c_values" => c.sweep_c_values = reals()?,
            "sweep.reference_g" => c.sweep_reference_g = positive()?,
            "sweep.target_error" => c.sweep_target_error = positive()?,
            "sweep.bisections" => c.sweep_bisections = count()?,
            "run.seed" => c.seed = v.parse().map_err(|_| err(line, format!("`{key}` needs an unsigned integer, got `{v}`")))?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    match (pairs.get("source.x"), pairs.get("source.z")) {
        (None, None) => {}
        (Some((xs, line)), z) => {
            let parse = |s: &str, line: usize| -> Result<Vec<f64>> {
                s.split(',')
                    .map(|t| t.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| err(line, format!("source positions need comma-separated numbers, got `{s}`")))
            };
            let xs = parse(xs, *line)?;
            let zs = match z {
                Some((zs, zl)) => parse(zs, *zl)?,
                None => vec![c.sources.first().map_or(-0.05, |s| s[1])],
            };
            if zs.len() != 1 && zs.len() != xs.len() {
                return Err(err(*line, format!("{} source x values but {} z values", xs.len(), zs.len())));
            }
            c.sources = xs.iter().enumerate().map(|(i, &x)| [x, zs[if zs.len() == 1 { 0 } else { i }]]).collect();
        }
        (None, Some((_, line))) => return Err(err(*line, "`source.z` needs `source.x`".into())),
    }
    if !(c.domain.x_min < c.domain.x_max && c.domain.z_min < c.domain.z_max) {
        return Err(err(0, format!("domain [{}, {}] x [{}, {}] is empty", c.domain.x_min, c.domain.x_max, c.domain.z_min, c.domain.z_max)));
    }
    if c.domain.z_max > 1e-9 {
        return Err(err(0, format!("domain.zmax = {} lies above the surface; depth must satisfy z <= 0", c.domain.z_max)));
    }
    if !(c.lower < c.upper) {
        return Err(err(0, format!("inversion bounds [{}, {}] are empty", c.lower, c.upper)));
    }
    Ok(c)
}

fn resolve(config: &Path, v: &str) -> PathBuf {
    let p = PathBuf::from(v);
    if p.is_absolute() {
        p
    } else {
        config.parent().map_or(p.clone(), |d| d.join(&p))
    }
}
