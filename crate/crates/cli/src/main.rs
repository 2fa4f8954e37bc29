use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use kmv_fwi::discretization::{interpolate_velocity, FieldSetup};
use kmv_fwi::experiments::{self, fwi, gradcheck, mms, sweep};
use kmv_fwi::io::{mesh_to_string, parse_config_over, write_shotrecord, write_velocity, MeshKind, RunConfig};
use kmv_fwi::mesh::{gradation_limit, mesh_quality, sizing_from_velocity};
use kmv_fwi::propagator::{forward, Snapshots};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "kmvfwi", version, about = "2D acoustic FWI with mass-lumped triangular elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// `section.key = value` settings applied over the subcommand's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for shot-level parallelism.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Run even when the time step exceeds 0.9 of the CFL estimate.
    #[arg(long)]
    override_cfl: bool,
    /// Run directory for outputs and the manifest.
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build a waveform-adapted mesh and report its sizing deviation.
    Mesh(Common),
    /// Simulate every configured shot and write the receiver records.
    Forward(Common),
    /// Compare the adjoint directional derivative with finite differences.
    GradCheck(Common),
    /// Manufactured-solution convergence ladder.
    Mms(Common),
    /// Receiver error against cells per wavelength, per element degree.
    Sweep(Common),
    /// Projected L-BFGS inversion of a toy model.
    Invert(Common),
}

/// Output directory with a hash manifest of everything written.
struct RunDir {
    root: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(RunDir { root: root.to_path_buf(), files: vec![] })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    }

    fn finish(self) -> Result<()> {
        let mut manifest = String::new();
        for name in &self.files {
            let bytes = fs::read(self.root.join(name))?;
            let _ = writeln!(manifest, "{}  {}  {}", hex::encode(Sha256::digest(&bytes)), bytes.len(), name);
        }
        fs::write(self.root.join("manifest.txt"), manifest)?;
        Ok(())
    }
}

fn load(common: &Common, base: RunConfig) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => parse_config_over(p, base)?,
        None => base,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn start(common: &Common, base: RunConfig) -> Result<(RunConfig, RunDir)> {
    if common.workers == 0 {
        bail!("--workers must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(common.workers).build_global().context("starting worker pool")?;
    let cfg = load(common, base)?;
    let mut run = RunDir::create(&common.out)?;
    if let Some(p) = &common.config {
        run.write("config.cfg", fs::read(p)?)?;
    }
    Ok((cfg, run))
}

fn cmd_mesh(common: &Common) -> Result<()> {
    let (cfg, mut run) = start(common, RunConfig::default())?;
    let vm = experiments::true_model(&cfg)?;
    let mesh = experiments::build_mesh(&cfg, &vm)?;
    let mut report = String::new();
    if cfg.mesh_kind == MeshKind::Adapted {
        let mut sf = sizing_from_velocity(&vm, cfg.frequency, cfg.cells_per_wavelength, cfg.min_size)?;
        sf.gradation_rate = cfg.gradation;
        let sf = gradation_limit(&sf)?;
        report.push_str(&mesh_quality(&mesh, Some(&sf)).to_string());
    } else {
        report.push_str(&mesh_quality(&mesh, None).to_string());
    }
    report.push('\n');
    print!("{report}");
    run.write("mesh.wlmesh", mesh_to_string(&mesh))?;
    run.write("quality.txt", report)?;
    run.finish()
}

fn cmd_forward(common: &Common) -> Result<()> {
    let (cfg, mut run) = start(common, RunConfig::default())?;
    let vm = experiments::true_model(&cfg)?;
    let mesh = experiments::build_mesh(&cfg, &vm)?;
    let n_el = mesh.n_triangles();
    let space = experiments::build_space(&cfg, mesh, vm.max())?;
    let c = interpolate_velocity(&vm, &space.dofmap);
    let fs = FieldSetup::new(space.clone(), c)?;
    let dt_cfl = kmv_fwi::discretization::estimate_dt_cfl(&fs);
    let dt = cfg.dt.unwrap_or(cfg.cfl_safety * dt_cfl);
    let alpha = (space.n_dofs() as f64 / n_el as f64).sqrt();
    let mut summary = String::new();
    let _ = writeln!(summary, "dt_cfl {dt_cfl:e}");
    let _ = writeln!(summary, "dt {dt:e}");
    let _ = writeln!(summary, "elements {n_el}");
    let _ = writeln!(summary, "dofs {}", space.n_dofs());
    let _ = writeln!(summary, "alpha {alpha:.6}");
    let _ = writeln!(summary, "G {:.6}", alpha * cfg.cells_per_wavelength);
    print!("{summary}");
    if dt > 0.9 * dt_cfl && !common.override_cfl {
        bail!("time step {dt:e} exceeds 0.9 x the CFL estimate {dt_cfl:e}; pass --override-cfl to run anyway");
    }
    let shots = experiments::shots(&cfg, dt);
    let records: Vec<_> = {
        use rayon::prelude::*;
        shots.par_iter().map(|s| forward(&fs, s, Snapshots::Discard).map(|r| r.0)).collect::<kmv_fwi::Result<Vec<_>>>()?
    };
    for (k, rec) in records.iter().enumerate() {
        let p = run.path(&format!("shot_{k:03}.wlshot"));
        write_shotrecord(&p, rec)?;
    }
    run.write("forward.txt", summary)?;
    run.finish()
}

fn cmd_gradcheck(common: &Common) -> Result<()> {
    let (cfg, mut run) = start(common, gradcheck::preset())?;
    let r = gradcheck::run(&cfg)?;
    let text = format!("{r}# monotone {}\n", r.monotone());
    print!("{text}");
    run.write("gradcheck.txt", text)?;
    run.finish()
}

fn cmd_mms(common: &Common) -> Result<()> {
    let (cfg, mut run) = start(common, mms::preset())?;
    let r = mms::run(&cfg)?;
    print!("{r}");
    run.write("mms.txt", r.to_string())?;
    run.finish()
}

fn cmd_sweep(common: &Common) -> Result<()> {
    let (cfg, mut run) = start(common, sweep::preset())?;
    let r = sweep::run(&cfg)?;
    let mut text = r.to_string();
    if let (Some(a), Some(b)) = (r.c_min_of(2), r.c_min_of(3)) {
        let _ = writeln!(text, "# C_min ratio degree 3 / degree 2 {:.4}", b / a);
    }
    print!("{text}");
    run.write("sweep.txt", text)?;
    run.finish()
}

fn cmd_invert(common: &Common) -> Result<()> {
    let (cfg, mut run) = start(common, RunConfig::default())?;
    let mut log = String::from("iter J gnorm alpha n_linesearch\n");
    let out = fwi::run(&cfg, |r| {
        println!("{r}");
        let _ = writeln!(log, "{r}");
    })?;
    let mut history = String::from("iter J\n");
    for (k, j) in out.state.history.iter().enumerate() {
        let _ = writeln!(history, "{k} {j:.12e}");
    }
    let center = cfg.anomaly_center;
    let mut summary = String::new();
    let _ = writeln!(summary, "dofs {}", out.space.n_dofs());
    let _ = writeln!(summary, "dt {:e}", out.dt);
    let _ = writeln!(summary, "misfit_start {:.12e}", out.initial_misfit());
    let _ = writeln!(summary, "misfit_final {:.12e}", out.final_misfit());
    let _ = writeln!(summary, "reduction {:.6}", out.initial_misfit() / out.final_misfit());
    let _ = writeln!(summary, "center_true {:.6}", out.velocity_at(&out.c_true, center)?);
    let _ = writeln!(summary, "center_final {:.6}", out.velocity_at(&out.state.c, center)?);
    let _ = writeln!(summary, "masked_unchanged {}", out.masked_unchanged());
    let _ = writeln!(summary, "stop {:?}", out.state.stop);
    print!("{summary}");
    run.write("iterations.log", log)?;
    run.write("misfit_history.txt", history)?;
    run.write("summary.txt", summary)?;
    let p = run.path("final_model.wlvm");
    write_velocity(&p, &out.raster(0.01)?)?;
    run.finish()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Mesh(c) => cmd_mesh(c),
        Command::Forward(c) => cmd_forward(c),
        Command::GradCheck(c) => cmd_gradcheck(c),
        Command::Mms(c) => cmd_mms(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Invert(c) => cmd_invert(c),
    }
}
