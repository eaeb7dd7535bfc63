//! Scalar abstraction: all core math is generic over the floating-point type.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::Float;

/// Floating-point scalar usable by the solver: `f32` or `f64` (or any type
/// implementing the same traits).
pub trait Scalar:
    Float + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
}

impl<T> Scalar for T where T: Float + Sum + Debug + Display + LowerExp + Send + Sync + 'static {}

/// Converts an `f64` constant into the working scalar type.
///
/// Panics only if the constant is not representable, which cannot happen for
/// the fixed literals used throughout this crate.
#[inline]
pub(crate) fn cst<T: Scalar>(x: f64) -> T {
    T::from(x).expect("constant representable in scalar type")
}
