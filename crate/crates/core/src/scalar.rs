//! Floating-point abstraction shared by the frame algebra and curvature formulas.

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};
use std::fmt::{Debug, Display};

/// Real scalar usable by the generic curvature code (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Widens the scalar to `f64`.
    fn to_f64_lossless(self) -> f64 {
        NumCast::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
