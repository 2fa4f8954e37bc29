use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn kmvfwi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kmvfwi")).args(args).output().expect("binary runs")
}

fn write_cfg(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "mesh.kind = structured\nmesh.h = 0.1\ntime.duration = 0.2\nreceivers.count = 5\n";

#[test]
fn unknown_key_fails_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "mesh.h = 0.1\nmesh.hh = 0.2\n");
    let out = kmvfwi(&["mesh", "--config", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":2:") && err.contains("unknown key"), "{err}");
}

#[test]
fn degree_four_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "element.degree = 4\n");
    let out = kmvfwi(&["forward", "--config", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported degree"));
}

#[test]
fn forward_guards_the_cfl_limit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{SMALL}time.cfl_safety = 0.95\n"));
    let run = dir.path().join("r");
    let out = kmvfwi(&["forward", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--override-cfl"));
    let out = kmvfwi(&["forward", "--config", &cfg, "--out", run.to_str().unwrap(), "--override-cfl"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("shot_003.wlshot").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("dt_cfl") && stdout.contains("alpha"));
}

#[test]
fn manifest_hashes_match_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (run, workers) in [(&a, "1"), (&b, "2")] {
        let out = kmvfwi(&["forward", "--config", &cfg, "--out", run.to_str().unwrap(), "--workers", workers, "--seed", "7"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert_eq!(manifest, fs::read_to_string(b.join("manifest.txt")).unwrap());
    let mut n = 0;
    for line in manifest.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        let bytes = fs::read(a.join(f[2])).unwrap();
        assert_eq!(f[0], hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f[1].parse::<usize>().unwrap(), bytes.len());
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn adapted_mesh_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "source.frequency = 6\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for run in [&a, &b] {
        let out = kmvfwi(&["mesh", "--config", &cfg, "--out", run.to_str().unwrap(), "--seed", "3"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(a.join("mesh.wlmesh")).unwrap(), fs::read(b.join("mesh.wlmesh")).unwrap());
    assert!(fs::read_to_string(a.join("quality.txt")).unwrap().contains("min angle"));
}

#[test]
fn short_inversion_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "inversion.iter_max = 2\nsource.frequency = 5\ntime.duration = 0.8\n");
    let run = dir.path().join("r");
    let out = kmvfwi(&["invert", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(run.join("iterations.log")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(run.join("final_model.wlvm").exists());
    let history = fs::read_to_string(run.join("misfit_history.txt")).unwrap();
    let js: Vec<f64> = history.lines().skip(1).map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap()).collect();
    assert!(js.windows(2).all(|w| w[1] < w[0]));
}
