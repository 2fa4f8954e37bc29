use std::fmt;

use super::{Mesh, SizingField};

/// Ratio bins used for the edge-length histogram (edge length / target length).
pub const RATIO_BINS: [f64; 8] = [0.0, 0.6, 0.8, 0.9, 1.1, 1.2, 1.4, f64::INFINITY];

#[derive(Debug, Clone, PartialEq)]
pub struct SizingDeviation {
    /// Fraction of edges whose length lies within ±20% of the target.
    pub within_20: f64,
    pub median_ratio: f64,
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub min_angle_deg: f64,
    pub mean_min_angle_deg: f64,
    pub area_sum: f64,
    pub sizing: Option<SizingDeviation>,
}

fn angles(p: [[f64; 2]; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cross = u[0] * v[1] - u[1] * v[0];
        let dot = u[0] * v[0] + u[1] * v[1];
        out[i] = cross.abs().atan2(dot).to_degrees();
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Angle statistics, covered area and, if a sizing field is given, the
/// distribution of edge length relative to the target at each edge midpoint.
pub fn mesh_quality(m: &Mesh, sizing: Option<&SizingField>) -> QualityReport {
    let mut min_angle = f64::INFINITY;
    let mut sum_min = 0.0;
    for t in 0..m.n_triangles() {
        let a = angles(m.triangle_points(t));
        let lo = a[0].min(a[1]).min(a[2]);
        min_angle = min_angle.min(lo);
        sum_min += lo;
    }
    let sizing = sizing.map(|sf| {
        let ratios: Vec<f64> = m
            .edges()
            .iter()
            .map(|e| {
                let (a, b) = (m.vertices[e[0]], m.vertices[e[1]]);
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                len / sf.eval([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])
            })
            .collect();
        let mut histogram = vec![0; RATIO_BINS.len() - 1];
        for &r in &ratios {
            let k = RATIO_BINS.windows(2).position(|w| r >= w[0] && r < w[1]).unwrap_or(histogram.len() - 1);
            histogram[k] += 1;
        }
        let within = ratios.iter().filter(|&&r| (0.8..=1.2).contains(&r)).count();
        SizingDeviation {
            within_20: within as f64 / ratios.len().max(1) as f64,
            median_ratio: median(ratios),
            histogram,
        }
    });
    QualityReport {
        n_vertices: m.n_vertices(),
        n_triangles: m.n_triangles(),
        min_angle_deg: min_angle,
        mean_min_angle_deg: sum_min / m.n_triangles().max(1) as f64,
        area_sum: m.total_area(),
        sizing,
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vertices {} triangles {}", self.n_vertices, self.n_triangles)?;
        writeln!(f, "min angle {:.2} deg, mean smallest angle {:.2} deg", self.min_angle_deg, self.mean_min_angle_deg)?;
        write!(f, "area {:.12}", self.area_sum)?;
        if let Some(s) = &self.sizing {
            write!(f, "\nedges within 20% of target: {:.1}%, median ratio {:.3}", 100.0 * s.within_20, s.median_ratio)?;
            for (k, w) in RATIO_BINS.windows(2).enumerate() {
                write!(f, "\n  ratio [{:.1}, {:.1}): {}", w[0], w[1], s.histogram[k])?;
            }
        }
        Ok(())
    }
}
