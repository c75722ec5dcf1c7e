//! Floating-point abstraction shared by the network, choice and solver code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the model code.
///
/// Everything numeric is generic over this trait so the kernels can be run
/// in `f32` for quick exploration or `f64` for certification. Tolerances in
/// the solver are expressed in the scalar type, so `f32` callers must loosen
/// them accordingly.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Positive part `(x)+ = max(x, 0)`.
    #[inline]
    fn pos(self) -> Self {
        if self > Self::zero() {
            self
        } else {
            Self::zero()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_part() {
        assert_eq!((-2.0f64).pos(), 0.0);
        assert_eq!(3.5f32.pos(), 3.5);
        assert_eq!(0.0f64.pos(), 0.0);
    }

    #[test]
    fn literal_round_trip() {
        assert_eq!(f32::lit(0.15), 0.15f32);
        assert_eq!(f64::lit(0.15).as_f64(), 0.15);
    }
}
