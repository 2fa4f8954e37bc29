use std::fs;
use std::path::Path;

use kmv_fwi::grid::Grid2;
use kmv_fwi::io::{
    mesh_to_string, parse_config_str, read_mesh, read_shotrecord, read_velocity, shot_to_bytes, write_mesh, write_shotrecord,
    write_velocity, MeshKind, RunConfig, VelocityModel,
};
use kmv_fwi::mesh::{structured_mesh, BoundaryKinds, BoundaryTag, Domain, PmlWidths, Rect};
use kmv_fwi::propagator::{ShotConfig, ShotRecord};
use kmv_fwi::FwiError;
use proptest::prelude::*;

fn sample_record() -> ShotRecord<f64> {
    let cfg = ShotConfig {
        source: [0.5, -0.1],
        frequency: 5.0,
        amplitude: 1.0,
        receivers: vec![[0.1, -0.9], [0.3, -0.9], [0.7, -0.85]],
        duration: 0.05,
        dt: 0.01,
        subsample: 1,
    };
    let mut r = ShotRecord::zeros(&cfg);
    for (k, v) in r.data.iter_mut().enumerate() {
        *v = (k as f64 * 0.37).sin() * 1e-3;
    }
    r
}

#[test]
fn velocity_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid2::new(4, 3, [0.0, -1.0], [1.0 / 3.0, 0.5]).unwrap();
    let vm = VelocityModel::from_fn(g, |x, z| 1.5 + x * 0.1 - z * std::f64::consts::PI).unwrap();
    let (a, b) = (dir.path().join("a.wlvm"), dir.path().join("b.wlvm"));
    write_velocity(&a, &vm).unwrap();
    let back = read_velocity(&a).unwrap();
    assert_eq!(back, vm);
    write_velocity(&b, &back).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn velocity_truncation_reports_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.wlvm");
    let g = Grid2::new(3, 2, [0.0, -1.0], [0.5, 1.0]).unwrap();
    write_velocity(&p, &VelocityModel::uniform(g, 2.0).unwrap()).unwrap();
    let mut bytes = fs::read(&p).unwrap();
    bytes.truncate(bytes.len() - 5);
    fs::write(&p, &bytes).unwrap();
    let msg = read_velocity(&p).unwrap_err().to_string();
    assert!(msg.contains("43 bytes") && msg.contains("expected 48"), "{msg}");
}

#[test]
fn velocity_above_surface_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.wlvm");
    let g = Grid2::new(2, 2, [0.0, -0.5], [1.0, 1.0]).unwrap();
    write_velocity(&p, &VelocityModel::uniform(g, 2.0).unwrap()).unwrap();
    assert!(matches!(read_velocity(&p), Err(FwiError::Format { .. })));
}

#[test]
fn mesh_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::sides_and_bottom(0.3));
    let kinds = BoundaryKinds { top: BoundaryTag::FreeSurface, ..BoundaryKinds::default() };
    let m = structured_mesh(&d, 0.1, kinds).unwrap();
    let p = dir.path().join("m.wlmesh");
    write_mesh(&p, &m).unwrap();
    let back = read_mesh(&p).unwrap();
    assert_eq!(back, m);
    assert_eq!(mesh_to_string(&back), fs::read_to_string(&p).unwrap());
    let head = fs::read_to_string(&p).unwrap().lines().next().unwrap().to_string();
    assert_eq!(head, format!("WLMESH1 {} {}", m.n_vertices(), m.n_triangles()));
}

#[test]
fn truncated_mesh_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::default());
    let m = structured_mesh(&d, 0.5, BoundaryKinds::default()).unwrap();
    let text = mesh_to_string(&m);
    let cut: String = text.lines().take(m.n_vertices() + 3).map(|l| format!("{l}\n")).collect();
    let p = dir.path().join("m.wlmesh");
    fs::write(&p, cut).unwrap();
    let msg = read_mesh(&p).unwrap_err().to_string();
    assert!(msg.contains("2 of 8 triangles"), "{msg}");
}

#[test]
fn shot_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let r = sample_record();
    let p = dir.path().join("s.wlshot");
    write_shotrecord(&p, &r).unwrap();
    let back = read_shotrecord(&p).unwrap();
    assert_eq!(back.nt, r.nt);
    assert_eq!(back.dt, r.dt);
    assert_eq!(back.receivers, r.receivers);
    for (a, b) in back.data.iter().zip(&r.data) {
        assert_eq!(*a, *b as f32);
    }
    assert_eq!(shot_to_bytes(&back), fs::read(&p).unwrap());
}

#[test]
fn shot_payload_is_receiver_major_f32() {
    let r = sample_record();
    let bytes = shot_to_bytes(&r);
    let header_len = bytes.len() - r.data.len() * 4;
    let first = f32::from_le_bytes(bytes[header_len + 4..header_len + 8].try_into().unwrap());
    assert_eq!(first, r.at(1, 0) as f32);
    let text = std::str::from_utf8(&bytes[..header_len]).unwrap();
    assert!(text.starts_with(&format!("WLSHOT1 {} 1e-2 3\n", r.nt)), "{text}");
}

#[test]
fn truncated_shot_reports_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let r = sample_record();
    let mut bytes = shot_to_bytes(&r);
    bytes.pop();
    let p = dir.path().join("s.wlshot");
    fs::write(&p, bytes).unwrap();
    let msg = read_shotrecord(&p).unwrap_err().to_string();
    let expected = r.nt * 3 * 4;
    assert!(msg.contains(&format!("{} bytes, expected {expected}", expected - 1)), "{msg}");
}

fn cfg(text: &str) -> Result<RunConfig, FwiError> {
    parse_config_str(text, Path::new("test.cfg"))
}

#[test]
fn config_parses_known_keys() {
    let c = cfg("# toy\nelement.degree = 3\nsource.x = 0.1, 0.9\nsource.z = -0.05\nmesh.kind = structured\ntime.dt = 5e-4 # fixed\nboundary.top = absorbing\n").unwrap();
    assert_eq!(c.degree, 3);
    assert_eq!(c.sources, vec![[0.1, -0.05], [0.9, -0.05]]);
    assert_eq!(c.mesh_kind, MeshKind::Structured);
    assert_eq!(c.dt, Some(5e-4));
    assert_eq!(c.top, BoundaryTag::Absorbing);
    assert_eq!(c.receivers().len(), 50);
}

#[test]
fn config_rejects_degree_four() {
    let e = cfg("element.degree = 4\n").unwrap_err();
    assert!(e.to_string().contains("unsupported degree"), "{e}");
    let e = cfg("sweep.degrees = 2, 4\n").unwrap_err();
    assert!(e.to_string().contains("unsupported degree"), "{e}");
}

#[test]
fn config_rejects_unknown_and_repeated_keys() {
    let e = cfg("element.degree = 2\nelement.degre = 2\n").unwrap_err();
    assert!(matches!(&e, FwiError::Config { line: 2, msg, .. } if msg.contains("unknown key")), "{e}");
    let e = cfg("mesh.c = 3\nmesh.c = 4\n").unwrap_err();
    assert!(e.to_string().contains("repeats line 1"), "{e}");
    assert!(cfg("just text\n").is_err());
    assert!(cfg("time.subsample = 0\n").is_err());
    assert!(cfg("domain.zmax = 0.5\n").is_err());
}

proptest! {
    #[test]
    fn velocity_round_trip_any_values(vals in prop::collection::vec(1e-3f64..10.0, 6), dx in 1e-3f64..1.0) {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2::new(3, 2, [-0.3, -2.0], [dx, 0.7]).unwrap();
        let vm = VelocityModel::new(g, vals).unwrap();
        let p = dir.path().join("v.wlvm");
        write_velocity(&p, &vm).unwrap();
        prop_assert_eq!(read_velocity(&p).unwrap(), vm);
    }
}
