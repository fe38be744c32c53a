//! Floating point abstraction shared by every model routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar the simulator can run on: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a step or sample count into `Self`.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy view as `f64`, used for diagnostics and I/O.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `x^(2/3)` evaluated as `exp((2/3) ln x)`; `x` must be positive.
#[inline]
pub fn pow_two_thirds<T: Scalar>(x: T) -> T {
    (T::lit(2.0 / 3.0) * x.ln()).exp()
}
