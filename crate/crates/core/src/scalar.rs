//! Numeric traits the rest of the crate is generic over.
//!
//! [`Scalar`] is enough to build and evaluate a QUBO (it is satisfied by
//! `f32`, `f64` and exact rationals such as [`num_rational::Rational64`]).
//! [`Real`] adds the transcendental functions needed for log-rates and
//! Metropolis acceptance, so only floating point types qualify.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, NumAssign, Signed, ToPrimitive};

/// Coefficient type of a QUBO matrix.
pub trait Scalar:
    Copy
    + Debug
    + Display
    + PartialOrd
    + Num
    + NumAssign
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion used for tolerance checks and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Conversion from `f64`, panicking only for non-representable values
    /// (NaN into a rational, for example).
    fn from_f64_exact(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(|| panic!("{value} is not representable"))
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in scalar")
    }
}

impl<T> Scalar for T where
    T: Copy
        + Debug
        + Display
        + PartialOrd
        + Num
        + NumAssign
        + Signed
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

/// Floating point scalar (`f32` or `f64`).
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}

/// Largest absolute value in an iterator, zero when empty.
pub(crate) fn max_abs<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values
        .into_iter()
        .map(|v| v.abs())
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}
