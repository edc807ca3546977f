//! Scalar abstractions shared by the numeric modules.
//!
//! [`Scalar`] is the minimum needed for pivoted elimination and for building
//! the discrete kernels; it is satisfied by `f32`, `f64` and exact rationals
//! such as `Ratio<i64>`. [`Real`] adds `Float` for anything that needs square
//! roots, logarithms or iterative eigenvalue work.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Num
    + Signed
    + Copy
    + PartialOrd
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal (tolerances, grid points) into this type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(|| panic!("{x} is not representable"))
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(|| panic!("{n} is not representable"))
    }

    /// Lossy view used for reporting and finiteness checks.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl<T> Scalar for T where
    T: Num
        + Signed
        + Copy
        + PartialOrd
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}
