//! Scalar abstraction: everything numeric in this crate is generic over [`Real`].
//!
//! `Real` is satisfied by `f32` and `f64`. Concrete `f64` aliases for the
//! main data types are exported at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    Float
    + FromPrimitive
    + NumCast
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; panics only if the value is not
    /// representable at all (never the case for finite `f64` into `f32`,
    /// which saturates through `as`-style casting in `num_traits`).
    #[inline]
    fn of(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 value not representable in scalar type")
    }

    /// Widening conversion to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// π in the scalar type.
    #[inline]
    fn pi() -> Self {
        Self::of(std::f64::consts::PI)
    }

    /// 2π in the scalar type.
    #[inline]
    fn two_pi() -> Self {
        Self::of(std::f64::consts::TAU)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(1.5), 1.5f32);
        assert_eq!(1.25f32.as_f64(), 1.25);
        assert_eq!(f64::pi(), std::f64::consts::PI);
    }
}
