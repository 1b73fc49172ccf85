//! Box sets, Euclidean projection, the directional (tangent-cone) projection
//! and the fixed selection of the set-valued sign map.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Membership tolerance used by [`BoxSet::tangent_projection`].
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-12;

/// Axis-aligned box `Π_k [lower_k, upper_k]`; infinite bounds are allowed,
/// which makes the nonnegative orthant a special case.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet<T: Real> {
    lower: DVector<T>,
    upper: DVector<T>,
}

impl<T: Real> BoxSet<T> {
    pub fn new(lower: DVector<T>, upper: DVector<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("box bounds", lower.len(), upper.len()));
        }
        for k in 0..lower.len() {
            if !(lower[k] <= upper[k]) {
                return Err(Error::Structure(format!(
                    "box component {k}: lower {} exceeds upper {}",
                    lower[k], upper[k]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(DVector::from_element(dim, lo), DVector::from_element(dim, hi))
    }

    /// Nonnegative orthant of dimension `dim`.
    pub fn orthant(dim: usize) -> Self {
        Self {
            lower: DVector::zeros(dim),
            upper: DVector::from_element(dim, T::infinity()),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
    pub fn lower(&self) -> &DVector<T> {
        &self.lower
    }
    pub fn upper(&self) -> &DVector<T> {
        &self.upper
    }

    pub fn is_compact(&self) -> bool {
        self.lower.iter().chain(self.upper.iter()).all(|v| v.is_finite_value())
    }

    pub fn contains(&self, x: &DVector<T>, tol: T) -> bool {
        x.len() == self.dim()
            && (0..x.len()).all(|k| x[k] >= self.lower[k] - tol && x[k] <= self.upper[k] + tol)
    }

    fn check_dim(&self, x: &DVector<T>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dim("box projection", self.dim(), x.len()));
        }
        Ok(())
    }

    /// Component-wise clamp, the Euclidean projection onto the box.
    pub fn project(&self, x: &DVector<T>) -> Result<DVector<T>> {
        self.check_dim(x)?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &DVector<T>) -> DVector<T> {
        DVector::from_fn(x.len(), |k, _| x[k].max(self.lower[k]).min(self.upper[k]))
    }

    /// `lim_{ξ→0⁺} (P(x + ξv) - x) / ξ` for `x` in the box.
    pub fn tangent_projection(&self, x: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>> {
        self.check_dim(x)?;
        self.check_dim(v)?;
        if !self.contains(x, T::lit(MEMBERSHIP_TOLERANCE)) {
            return Err(Error::Precondition(
                "tangent projection base point lies outside the set".into(),
            ));
        }
        Ok(self.tangent_projection_unchecked(x, v))
    }

    /// Tangent projection evaluated at the nearest point of the box to `x`.
    ///
    /// Closed-loop outputs can sit outside their box during transients (and
    /// through integration drift); the controllers use this form so that a
    /// bound that has been crossed still blocks further outward motion.
    pub fn tangent_projection_at_nearest(&self, x: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>> {
        self.check_dim(x)?;
        self.check_dim(v)?;
        Ok(self.tangent_projection_unchecked(&self.project_unchecked(x), v))
    }

    pub(crate) fn tangent_projection_unchecked(&self, x: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        DVector::from_fn(x.len(), |k, _| {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            if lo == hi {
                T::zero()
            } else if x[k] <= lo {
                v[k].max(T::zero())
            } else if x[k] >= hi {
                v[k].min(T::zero())
            } else {
                v[k]
            }
        })
    }
}

/// Scalar sign with the selection `sgn(0) = 0`.
#[inline]
pub fn sign_scalar<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Component-wise sign with `sgn(0) = 0`.
pub fn sign_select<T: Real>(x: &DVector<T>) -> DVector<T> {
    x.map(sign_scalar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn b2(lo: f64, hi: f64) -> BoxSet<f64> {
        BoxSet::cube(2, lo, hi).unwrap()
    }

    #[test]
    fn euclidean_projection_examples() {
        assert_eq!(b2(-1.0, 6.0).project(&dvector![7.0, 0.0]).unwrap(), dvector![6.0, 0.0]);
        assert_eq!(b2(-1.0, 6.0).project(&dvector![1.0, 2.0]).unwrap(), dvector![1.0, 2.0]);
        let orth = BoxSet::<f64>::orthant(2);
        assert_eq!(orth.project(&dvector![-3.0, 2.0]).unwrap(), dvector![0.0, 2.0]);
        assert!(orth.project(&dvector![1.0]).is_err());
    }

    #[test]
    fn tangent_projection_examples() {
        let orth = BoxSet::<f64>::orthant(1);
        assert_eq!(orth.tangent_projection(&dvector![0.0], &dvector![-2.0]).unwrap(), dvector![0.0]);
        let bx = BoxSet::cube(1, -1.0, 6.0).unwrap();
        assert_eq!(bx.tangent_projection(&dvector![1.0], &dvector![-2.0]).unwrap(), dvector![-2.0]);
        let unit = b2(0.0, 1.0);
        let x = dvector![0.0, 1.0];
        let v = dvector![-1.0, -1.0];
        let tp = unit.tangent_projection(&x, &v).unwrap();
        assert_eq!(tp, dvector![0.0, -1.0]);
        let xi = 1e-8;
        let fd = (unit.project(&(&x + &v * xi)).unwrap() - &x) / xi;
        assert!((fd - tp).norm() < 1e-6);
    }

    #[test]
    fn tangent_projection_rejects_outside_point() {
        let bx = b2(0.0, 1.0);
        assert!(bx.tangent_projection(&dvector![2.0, 0.5], &dvector![1.0, 1.0]).is_err());
        let tp = bx.tangent_projection_at_nearest(&dvector![2.0, 0.5], &dvector![1.0, 1.0]).unwrap();
        assert_eq!(tp, dvector![0.0, 1.0]);
    }

    #[test]
    fn degenerate_interval_blocks_motion() {
        let bx = BoxSet::new(dvector![1.0], dvector![1.0]).unwrap();
        assert_eq!(bx.tangent_projection(&dvector![1.0], &dvector![3.0]).unwrap(), dvector![0.0]);
    }

    #[test]
    fn invalid_box_rejected() {
        assert!(BoxSet::new(dvector![1.0], dvector![0.0]).is_err());
    }

    #[test]
    fn sign_selection() {
        assert_eq!(sign_select(&dvector![-3.0, 0.0, 2.0]), dvector![-1.0, 0.0, 1.0]);
        assert_eq!(sign_select(&dvector![0.0, 0.0]), dvector![0.0, 0.0]);
        assert_eq!(sign_select(&dvector![1e-300]), dvector![1.0]);
    }
}
