//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the synthesis, geometry and
/// simulation code. Implemented for `f32` and `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + std::fmt::Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    /// Rescales a tolerance stated for `f64` to the precision of `Self`.
    ///
    /// For `f64` this is the identity; for `f32` the tolerance grows by the
    /// ratio of machine epsilons.
    #[inline]
    fn tol(x: f64) -> Self {
        let ratio = Self::default_epsilon().to_f64_lossy() / f64::EPSILON;
        Self::lit(x * ratio.max(1.0))
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.to_f64_lossy().is_finite()
    }
}

impl<T> Real for T where
    T: RealField + Copy + FromPrimitive + ToPrimitive + std::fmt::Display + Send + Sync + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_scaling() {
        assert_eq!(f64::tol(1e-10), 1e-10);
        assert!(f32::tol(1e-10) > 1e-5);
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert!(f64::infinity().is_infinite());
    }
}
