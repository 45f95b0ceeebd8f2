//! Scalar abstraction for the kernels that are genuinely precision-agnostic
//! (quadrature, summary statistics). The laboratory itself runs in `f64`,
//! re-exported as [`crate::Real`], because its tolerance contracts and the
//! special-function layer are double-precision specific.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating point scalar usable by the generic numeric kernels.
pub trait Scalar:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant; panics only for types that cannot
    /// represent ordinary finite constants, which no `Float` impl does.
    fn c(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant must convert")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
