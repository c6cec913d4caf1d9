//! Scalar abstraction: model math is generic over the floating-point type.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar all numeric kernels are generic over: `f32` or `f64`.
///
/// File formats are pinned to 64-bit reals, so I/O works with the `f64`
/// aliases exported at the crate root; the math itself is width-agnostic.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` constant (tolerances, series coefficients).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant representable in scalar type")
    }

    /// Round-trip to `f64`, used by the fixed-width file formats.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
