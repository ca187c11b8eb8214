//! Scalar abstraction for the information-theoretic core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable by the channel, capacity, design and
/// asymmetry modules: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Largest deviation of a probability vector's sum from one that is
    /// silently renormalized instead of rejected.
    const NORMALIZATION_TOLERANCE: f64;

    /// Default Blahut-Arimoto stopping threshold in bits.
    const DEFAULT_GAP: f64;

    /// Converts an `f64` literal. Every value used in this crate is
    /// representable (possibly rounded) in both `f32` and `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {
    const NORMALIZATION_TOLERANCE: f64 = 1e-4;
    const DEFAULT_GAP: f64 = 1e-5;
}

impl Real for f64 {
    const NORMALIZATION_TOLERANCE: f64 = 1e-6;
    const DEFAULT_GAP: f64 = 1e-9;
}

/// `x * log2(x)` with the `0 * log 0 = 0` convention.
#[inline]
pub(crate) fn xlog2x<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.log2()
    }
}
