use crate::scalar::Real;

use super::operators::assemble_stiffness;
use super::setup::FieldSetup;

/// Gershgorin bound on the spectral radius of `M⁻¹ K`: the largest absolute row sum.
pub fn spectral_radius_bound<T: Real>(fs: &FieldSetup<T>) -> f64 {
    let k = assemble_stiffness(fs);
    (0..k.n_rows())
        .map(|i| k.row(i).map(|(_, v)| v.abs()).sum::<f64>() / fs.space.mass[i].as_f64())
        .fold(0.0, f64::max)
}

/// Leapfrog stability limit `2 / sqrt(ρ)` with `ρ` from [`spectral_radius_bound`] (seconds).
pub fn estimate_dt_cfl<T: Real>(fs: &FieldSetup<T>) -> f64 {
    2.0 / spectral_radius_bound(fs).sqrt()
}
