//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Everything in the crate is written against this trait. Constants are
/// brought in through [`Real::lit`], which rounds an `f64` literal to the
/// target precision.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + 'static
{
    /// Converts an `f64` literal to this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in target float type")
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable as float")
    }

    /// Machine epsilon of the type.
    fn eps() -> Self;

    /// `true` when the value is neither infinite nor NaN.
    fn finite(self) -> bool;

    /// Smallest magnitude treated as a nonzero kernel value; smaller products
    /// are flushed to zero. Never below the type's smallest normal value.
    fn kernel_floor() -> Self;
}

impl Real for f64 {
    #[inline]
    fn eps() -> Self {
        f64::EPSILON
    }
    #[inline]
    fn finite(self) -> bool {
        self.is_finite()
    }
    #[inline]
    fn kernel_floor() -> Self {
        1e-300
    }
}

impl Real for f32 {
    #[inline]
    fn eps() -> Self {
        f32::EPSILON
    }
    #[inline]
    fn finite(self) -> bool {
        self.is_finite()
    }
    #[inline]
    fn kernel_floor() -> Self {
        f32::MIN_POSITIVE
    }
}

/// Symmetry tolerance used when validating covariance-like matrices.
///
/// For `f64` this is the fixed `1e-12` elementwise bound, loosened in
/// proportion to the largest entry; `f32` gets a proportional epsilon-based
/// bound instead since `1e-12` is below its resolution.
pub(crate) fn symmetry_tolerance<T: Real>(scale: T) -> T {
    let base = T::lit(1e-12).max(T::eps() * T::lit(16.0));
    base * scale.max(T::one())
}
