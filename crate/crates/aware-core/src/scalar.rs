use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric core is generic over.
///
/// Everything downstream of the tensor layer (tape, model, oracles, RIP lab)
/// works for any `Scalar`; the crate-root aliases pin `f64`, which is what the
/// 1e-8 oracle residuals need.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`. All literals and RNG draws go through
    /// this so the random streams are identical across scalar types.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for `T::from_f64_lossy` used throughout the numeric code.
pub fn sc<T: Scalar>(x: f64) -> T {
    T::from_f64_lossy(x)
}
