use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{FwiError, Result};
use crate::grid::Grid2;
use crate::io::VelocityModel;

/// Target edge length (km) sampled on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SizingField {
    pub grid: Grid2,
    pub values: Vec<f64>,
    pub gradation_rate: f64,
}

impl SizingField {
    pub fn new(grid: Grid2, values: Vec<f64>, gradation_rate: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FwiError::invalid("sizing values do not match the grid"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(FwiError::invalid("sizing values must be finite and positive"));
        }
        Ok(SizingField { grid, values, gradation_rate })
    }

    pub fn uniform(grid: Grid2, h: f64) -> Result<Self> {
        SizingField::new(grid, vec![h; grid.len()], 0.15)
    }

    /// Target length at `p`; outside the grid the nearest edge value is replicated.
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.grid.sample(&self.values, p)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `l_e = max(c / (C f), l_min)` on the velocity grid.
pub fn sizing_from_velocity(vm: &VelocityModel, f_source: f64, cells_per_wavelength: f64, l_min: f64) -> Result<SizingField> {
    if !(f_source > 0.0) {
        return Err(FwiError::invalid(format!("source frequency must be positive, got {f_source}")));
    }
    if !(cells_per_wavelength > 0.0) {
        return Err(FwiError::invalid(format!("cells per wavelength must be positive, got {cells_per_wavelength}")));
    }
    if !(l_min >= 0.0) {
        return Err(FwiError::invalid(format!("minimum edge length must be non-negative, got {l_min}")));
    }
    let values = vm.values.iter().map(|&c| (c / (cells_per_wavelength * f_source)).max(l_min)).collect();
    SizingField::new(vm.grid, values, 0.15)
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on the value
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Caps growth of the field: the result is the largest field below the
/// input with `l(a) <= l(b) + rate * |a - b|` for every pair of 8-connected
/// grid neighbours. Computed by a Dijkstra sweep from the smallest values.
pub fn gradation_limit(sf: &SizingField) -> Result<SizingField> {
    let rate = sf.gradation_rate;
    if !(rate > 0.0 && rate < 1.0) {
        return Err(FwiError::invalid(format!("gradation rate must lie in (0, 1), got {rate}")));
    }
    let g = sf.grid;
    let [dx, dz] = g.spacing;
    let dd = dx.hypot(dz);
    let steps: [(isize, isize, f64); 8] =
        [(-1, 0, dx), (1, 0, dx), (0, -1, dz), (0, 1, dz), (-1, -1, dd), (1, -1, dd), (-1, 1, dd), (1, 1, dd)];
    let mut out = sf.values.clone();
    let mut heap: BinaryHeap<Entry> = out.iter().enumerate().map(|(k, &v)| Entry(v, k)).collect();
    while let Some(Entry(v, k)) = heap.pop() {
        if v > out[k] {
            continue;
        }
        let (i, j) = ((k % g.nx) as isize, (k / g.nx) as isize);
        for &(di, dj, d) in &steps {
            let (ni, nj) = (i + di, j + dj);
            if ni < 0 || nj < 0 || ni >= g.nx as isize || nj >= g.nz as isize {
                continue;
            }
            let nk = g.index(ni as usize, nj as usize);
            let cand = v + rate * d;
            if cand < out[nk] {
                out[nk] = cand;
                heap.push(Entry(cand, nk));
            }
        }
    }
    SizingField::new(g, out, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(nx: usize, nz: usize, h: f64) -> Grid2 {
        Grid2::new(nx, nz, [0.0, -(nz as f64 - 1.0) * h], [h, h]).unwrap()
    }

    #[test]
    fn sizing_formula() {
        let vm = VelocityModel::uniform(grid(3, 3, 0.1), 1.43).unwrap();
        let sf = sizing_from_velocity(&vm, 5.0, 5.85, 0.0).unwrap();
        assert!(sf.values.iter().all(|&v| (v - 1.43 / 29.25).abs() < 1e-15));
        assert_relative_eq!(sf.values[0], 0.048889, epsilon = 1e-6);
        let vm = VelocityModel::uniform(grid(2, 2, 0.1), 1.5).unwrap();
        let sf = sizing_from_velocity(&vm, 5.0, 4.0, 0.0).unwrap();
        assert_relative_eq!(sf.values[3], 0.075, epsilon = 1e-15);
        assert!(sizing_from_velocity(&vm, 0.0, 4.0, 0.0).is_err());
        assert!(sizing_from_velocity(&vm, 5.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn sizing_floor_applies() {
        let vm = VelocityModel::uniform(grid(2, 2, 0.1), 1.5).unwrap();
        let sf = sizing_from_velocity(&vm, 5.0, 4.0, 0.1).unwrap();
        assert_eq!(sf.values, vec![0.1; 4]);
    }

    #[test]
    fn two_valued_model_ratio() {
        let g = grid(4, 4, 0.1);
        let vm = VelocityModel::from_fn(g, |_, z| if z > -0.15 { 4.0 } else { 1.0 }).unwrap();
        let sf = sizing_from_velocity(&vm, 5.0, 4.0, 0.0).unwrap();
        let mut distinct = sf.values.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert_eq!(distinct.len(), 2);
        assert_relative_eq!(distinct[1] / distinct[0], 4.0, epsilon = 1e-14);
    }

    /// Brute-force fixed point of the neighbour constraints.
    fn relax(sf: &SizingField) -> Vec<f64> {
        let g = sf.grid;
        let mut v = sf.values.clone();
        loop {
            let mut changed = false;
            for j in 0..g.nz {
                for i in 0..g.nx {
                    for dj in -1i64..=1 {
                        for di in -1i64..=1 {
                            let (ni, nj) = (i as i64 + di, j as i64 + dj);
                            if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= g.nx as i64 || nj >= g.nz as i64 {
                                continue;
                            }
                            let d = ((di as f64 * g.spacing[0]).powi(2) + (dj as f64 * g.spacing[1]).powi(2)).sqrt();
                            let cand = v[g.index(ni as usize, nj as usize)] + sf.gradation_rate * d;
                            let k = g.index(i, j);
                            if cand < v[k] - 1e-15 {
                                v[k] = cand;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                return v;
            }
        }
    }

    #[test]
    fn spike_grows_linearly() {
        let g = grid(41, 41, 0.5);
        let mut values = vec![1.0; g.len()];
        let centre = g.index(20, 20);
        values[centre] = 0.01;
        let sf = SizingField::new(g, values, 0.15).unwrap();
        let lim = gradation_limit(&sf).unwrap();
        for i in 20..41 {
            let d = (i - 20) as f64 * 0.5;
            let expect = (0.01 + 0.15 * d).min(1.0);
            assert_relative_eq!(lim.values[g.index(i, 20)], expect, epsilon = 1e-12);
        }
        let brute = relax(&sf);
        for (a, b) in lim.values.iter().zip(&brute) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn smooth_field_unchanged_and_idempotent() {
        let g = grid(10, 8, 0.1);
        let sf = SizingField::new(g, (0..g.len()).map(|k| 0.5 + 0.001 * (k % 10) as f64).collect(), 0.15).unwrap();
        let lim = gradation_limit(&sf).unwrap();
        assert_eq!(lim.values, sf.values);
        let twice = gradation_limit(&lim).unwrap();
        assert_eq!(twice.values, lim.values);
    }

    #[test]
    fn two_layer_growth_bounded() {
        let g = grid(30, 30, 0.05);
        let vm = VelocityModel::from_fn(g, |_, z| if z > -0.7 { 4.0 } else { 1.0 }).unwrap();
        let sf = sizing_from_velocity(&vm, 5.0, 4.0, 0.0).unwrap();
        let lim = gradation_limit(&sf).unwrap();
        for j in 0..g.nz {
            for i in 0..g.nx - 1 {
                let (a, b) = (lim.values[g.index(i, j)], lim.values[g.index(i + 1, j)]);
                assert!((a - b).abs() <= 0.15 * 0.05 + 1e-12);
            }
        }
        for j in 0..g.nz - 1 {
            for i in 0..g.nx {
                let (a, b) = (lim.values[g.index(i, j)], lim.values[g.index(i, j + 1)]);
                assert!((a - b).abs() <= 0.15 * 0.05 + 1e-12);
            }
        }
        assert!(lim.values.iter().zip(&sf.values).all(|(o, i)| o <= i));
    }

    #[test]
    fn rate_out_of_range_rejected() {
        let g = grid(2, 2, 0.1);
        let sf = SizingField::new(g, vec![1.0; 4], 1.5).unwrap();
        assert!(gradation_limit(&sf).is_err());
    }
}
