use std::fs;
use std::path::Path;

use crate::error::{FwiError, Result};
use crate::propagator::ShotRecord;
use crate::scalar::Real;

pub(crate) const SHOT_MAGIC: &str = "WLSHOT1";

/// Header `WLSHOT1 nt dt nrec`, one `x z` line per receiver, then
/// little-endian binary32 samples stored receiver by receiver.
pub fn shot_to_bytes<T: Real>(rec: &ShotRecord<T>) -> Vec<u8> {
    let nr = rec.n_receivers();
    let mut s = format!("{SHOT_MAGIC} {} {:e} {nr}\n", rec.nt, rec.dt);
    for r in &rec.receivers {
        s.push_str(&format!("{:e} {:e}\n", r[0], r[1]));
    }
    let mut buf = s.into_bytes();
    buf.reserve(rec.data.len() * 4);
    for r in 0..nr {
        for n in 0..rec.nt {
            buf.extend_from_slice(&(rec.at(n, r).as_f64() as f32).to_le_bytes());
        }
    }
    buf
}

pub fn write_shotrecord<T: Real>(path: &Path, rec: &ShotRecord<T>) -> Result<()> {
    fs::write(path, shot_to_bytes(rec))?;
    Ok(())
}

pub fn read_shotrecord(path: &Path) -> Result<ShotRecord<f32>> {
    let bytes = fs::read(path)?;
    let fmt = |msg: String| FwiError::Format { path: path.to_path_buf(), msg };
    let mut pos = 0;
    let mut next_line = |what: &str| -> Result<&str> {
        let rest = &bytes[pos..];
        let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| fmt(format!("missing {what} line")))?;
        pos += nl + 1;
        std::str::from_utf8(&rest[..nl]).map_err(|_| fmt(format!("{what} line is not ASCII")))
    };
    let header = next_line("header")?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 4 || f[0] != SHOT_MAGIC {
        return Err(fmt(format!("expected header `{SHOT_MAGIC} nt dt nrec`, got `{header}`")));
    }
    let nt: usize = f[1].parse().map_err(|_| fmt(format!("bad sample count `{}`", f[1])))?;
    let dt: f64 = f[2].parse().map_err(|_| fmt(format!("bad time step `{}`", f[2])))?;
    let nr: usize = f[3].parse().map_err(|_| fmt(format!("bad receiver count `{}`", f[3])))?;
    if !(dt > 0.0) {
        return Err(fmt(format!("time step {dt} is not positive")));
    }
    let mut receivers = Vec::with_capacity(nr);
    for k in 0..nr {
        let line = next_line("receiver")?;
        let c: Vec<f64> = line.split_whitespace().map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| fmt(format!("bad coordinates for receiver {k}: `{line}`")))?;
        if c.len() != 2 {
            return Err(fmt(format!("receiver {k} line needs 2 coordinates, has {}", c.len())));
        }
        receivers.push([c[0], c[1]]);
    }
    let payload = &bytes[pos..];
    let expected = nt * nr * 4;
    if payload.len() != expected {
        return Err(fmt(format!("payload holds {} bytes, expected {expected}", payload.len())));
    }
    let mut data = vec![0f32; nt * nr];
    for (k, c) in payload.chunks_exact(4).enumerate() {
        let (r, n) = (k / nt, k % nt);
        data[n * nr + r] = f32::from_le_bytes(c.try_into().expect("4-byte chunk"));
    }
    Ok(ShotRecord { dt, receivers, nt, data })
}
