//! Scalar abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, NumAssign, Signed, ToPrimitive, Zero};

/// Floating-point scalar the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; every literal used in the crate is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact rational used for quadrature weights whenever node coordinates are rational.
pub type Rational = Ratio<i128>;

/// Scalar usable as a pivot in Gaussian elimination, exact or floating.
pub trait Pivot: Clone + NumAssign + Signed + PartialOrd + Debug {
    /// Whether `self` should be treated as zero relative to `scale`.
    fn negligible(&self, scale: &Self) -> bool;

    fn from_rational(r: &Rational) -> Self;
}

impl Pivot for f64 {
    fn negligible(&self, scale: &Self) -> bool {
        self.abs() <= 1e-12 * scale.abs().max(1.0)
    }

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
}

impl Pivot for Rational {
    fn negligible(&self, _scale: &Self) -> bool {
        self.is_zero()
    }

    fn from_rational(r: &Rational) -> Self {
        *r
    }
}

pub fn rational(num: i128, den: i128) -> Rational {
    Ratio::new(num, den)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
