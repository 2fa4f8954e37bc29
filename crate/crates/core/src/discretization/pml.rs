use crate::error::{FwiError, Result};
use crate::mesh::{Domain, PmlWidths};

/// Damping profile of the absorbing layer: `σ = σ_max (d / w)^2` at depth `d`
/// into a layer of width `w`, zero inside the physical rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlSpec {
    pub domain: Domain,
    /// Peak damping (1/s) on the left, right, bottom and top layers.
    pub sigma_max: [f64; 4],
    pub exponent: i32,
}

/// Reflection coefficient used for the default peak damping.
pub const DEFAULT_REFLECTION: f64 = 1e-3;

/// `σ_max = -3 c / (2 w) ln R` for a layer of width `w`.
pub fn sigma_max_for(c_ref: f64, width: f64, reflection: f64) -> f64 {
    if width <= 0.0 {
        0.0
    } else {
        -3.0 * c_ref / (2.0 * width) * reflection.ln()
    }
}

impl PmlSpec {
    /// Default damping for reference wavespeed `c_ref` (km/s) and reflection 1e-3.
    pub fn new(domain: Domain, c_ref: f64) -> Result<Self> {
        PmlSpec::with_reflection(domain, c_ref, DEFAULT_REFLECTION)
    }

    pub fn with_reflection(domain: Domain, c_ref: f64, reflection: f64) -> Result<Self> {
        if !(c_ref > 0.0) {
            return Err(FwiError::invalid(format!("reference wavespeed must be positive, got {c_ref}")));
        }
        if !(reflection > 0.0 && reflection < 1.0) {
            return Err(FwiError::invalid(format!("reflection coefficient must lie in (0, 1), got {reflection}")));
        }
        let PmlWidths { left, right, bottom, top } = domain.pml;
        let sigma_max = [left, right, bottom, top].map(|w| sigma_max_for(c_ref, w, reflection));
        Ok(PmlSpec { domain, sigma_max, exponent: 2 })
    }

    /// No damping anywhere (layer geometry is kept).
    pub fn disabled(domain: Domain) -> Self {
        PmlSpec { domain, sigma_max: [0.0; 4], exponent: 2 }
    }

    /// `(σ_x, σ_z)` at `p`.
    pub fn sigma(&self, p: [f64; 2]) -> (f64, f64) {
        let r = &self.domain.physical;
        let w = &self.domain.pml;
        let prof = |depth: f64, width: f64, smax: f64| {
            if depth <= 0.0 || width <= 0.0 {
                0.0
            } else {
                smax * (depth.min(width) / width).powi(self.exponent)
            }
        };
        let sx = prof(r.x_min - p[0], w.left, self.sigma_max[0]) + prof(p[0] - r.x_max, w.right, self.sigma_max[1]);
        let sz = prof(r.z_min - p[1], w.bottom, self.sigma_max[2]) + prof(p[1] - r.z_max, w.top, self.sigma_max[3]);
        (sx, sz)
    }
}

/// Nodal damping fields at the given coordinates.
pub fn pml_profiles(spec: &PmlSpec, coords: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
    coords.iter().map(|&p| spec.sigma(p)).unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use approx::assert_relative_eq;

    #[test]
    fn profile_values() {
        let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::sides_and_bottom(0.2));
        let spec = PmlSpec::new(d, 2.0).unwrap();
        let smax = -3.0 * 2.0 / 0.4 * 1e-3f64.ln();
        assert_relative_eq!(spec.sigma_max[0], smax, epsilon = 1e-12);
        assert_eq!(spec.sigma([0.5, -0.5]), (0.0, 0.0));
        assert_eq!(spec.sigma([0.0, -1.0]), (0.0, 0.0));
        assert_relative_eq!(spec.sigma([-0.2, -0.5]).0, smax, epsilon = 1e-12);
        assert_relative_eq!(spec.sigma([1.1, -0.5]).0, smax / 4.0, epsilon = 1e-12);
        let (sx, sz) = spec.sigma([-0.1, -1.2]);
        assert_relative_eq!(sx, smax / 4.0, epsilon = 1e-12);
        assert_relative_eq!(sz, smax, epsilon = 1e-12);
        // no layer above the surface
        assert_eq!(spec.sigma_max[3], 0.0);
    }
}
