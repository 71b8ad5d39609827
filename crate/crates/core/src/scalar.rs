//! Floating-point scalar abstraction.
//!
//! All signal-processing and network math in this crate is generic over a
//! [`Real`] scalar so the same code runs in `f32` or `f64`. The command-line
//! pipeline uses `f64` throughout (see the type aliases at the crate root);
//! `f32` is exercised by the test suite to keep the generic path honest.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Scalar type the numeric pipeline is generic over.
///
/// This is a convenience umbrella over the `num-traits` capabilities the crate
/// actually uses: float arithmetic, conversions from primitive types,
/// assignment operators, and summation. `Send + Sync + 'static` are required
/// so generic buffers can cross thread boundaries in the parallel pipeline.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Casts an `f64` constant into the scalar type.
    ///
    /// Shorthand for `FromPrimitive::from_f64(v).unwrap()`, used for literal
    /// constants that are always representable (filter coefficients, fixed
    /// gains, tolerances), where an `Option` would only add noise.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("numeric constant must be representable in the scalar type")
    }

    /// Lossy conversion to `f64` for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar value must convert to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
