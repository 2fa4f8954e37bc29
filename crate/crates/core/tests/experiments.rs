use kmv_fwi::experiments::{self, fwi, gradcheck, mms, stability, sweep};
use kmv_fwi::io::{MeshKind, RunConfig};
use kmv_fwi::propagator::{ShotConfig, ShotRecord};

#[test]
fn receiver_error_oracle() {
    let cfg = ShotConfig { source: [0.5, -0.5], frequency: 5.0, amplitude: 1.0, receivers: vec![[0.1, -0.1]; 2], duration: 0.3, dt: 0.1, subsample: 1 };
    let mut q = ShotRecord::<f64>::zeros(&cfg);
    q.data = vec![1.0, 0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 2.0];
    let mut p = q.clone();
    assert_eq!(sweep::receiver_error(&p, &q).unwrap(), 0.0);
    p.data[2] += 1.0;
    // trapezoid weights 0.5, 1, 1, 0.5 per receiver
    let den: f64 = 0.5 * (1.0 + 0.0) + (4.0 + 1.0) + (1.0 + 1.0) + 0.5 * (0.0 + 4.0);
    let expected = 100.0 * (1.0f64 / den).sqrt();
    assert!((sweep::receiver_error(&p, &q).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn toy_model_layers() {
    let cfg = RunConfig::default();
    let vm = experiments::true_model(&cfg).unwrap();
    assert_eq!(vm.sample(0.5, -0.02), 1.5);
    assert!((vm.sample(0.1, -0.9) - 2.0).abs() < 1e-12);
    assert!((vm.sample(0.5, -0.55) - 2.4).abs() < 1e-12);
    let start = experiments::start_model(&cfg).unwrap();
    assert!((start.sample(0.5, -0.55) - 2.0).abs() < 1e-12);
}

#[test]
fn coarse_gradcheck_agrees() {
    let cfg = RunConfig { mesh_h: 0.05, duration: 0.5, dt: Some(1e-3), receiver_count: 20, ..gradcheck::preset() };
    let r = gradcheck::run(&cfg).unwrap();
    assert!(r.d_co > 0.0);
    assert!(r.rows.last().unwrap().rel_diff < 1e-3, "{r}");
    assert!(r.monotone(), "{r}");
}

#[test]
fn coarse_mms_converges() {
    let cfg = RunConfig { mms_sizes: vec![0.2, 0.1], mms_degrees: vec![1, 2], mms_duration: 0.05, ..mms::preset() };
    let r = mms::run(&cfg).unwrap();
    assert!(r.orders(1)[0] > 1.5, "{r}");
    assert!(r.orders(2)[0] > 2.0, "{r}");
    assert!(r.finest_error(2).unwrap() < r.finest_error(1).unwrap());
}

#[test]
fn cfl_bracket() {
    assert!(stability::cfl_run(0.8, 300).unwrap().growth() < 1.01);
    assert!(stability::cfl_run(1.5, 600).unwrap().growth().is_infinite());
}

#[test]
fn short_fwi_reduces_misfit_and_keeps_water() {
    let cfg = RunConfig { iter_max: 4, mesh_kind: MeshKind::Structured, mesh_h: 0.1, frequency: 5.0, duration: 0.8, ..RunConfig::default() };
    let out = fwi::run(&cfg, |_| {}).unwrap();
    assert!(out.final_misfit() < 0.5 * out.initial_misfit());
    assert!(out.masked_unchanged());
    assert!(out.state.c.iter().all(|&c| (cfg.lower..=cfg.upper).contains(&c)));
    let raster = out.raster(0.05).unwrap();
    assert_eq!(raster.grid.nx, 21);
}
