//! Exponentiated uniform distribution on `[l, u]` with CDF `((x - l)/(u - l))^β`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// What to do with an argument outside the support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfRange {
    #[default]
    Error,
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpUniform<T> {
    lower: T,
    upper: T,
    shape: T,
}

impl<T: Scalar> ExpUniform<T> {
    pub fn new(lower: T, upper: T, shape: T) -> Result<Self> {
        if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::domain(format!(
                "exponentiated uniform needs lower < upper, got ({lower}, {upper})"
            )));
        }
        if !(shape > T::zero()) || !shape.is_finite() {
            return Err(Error::domain(format!("shape must be positive, got {shape}")));
        }
        Ok(ExpUniform { lower, upper, shape })
    }

    pub fn lower(&self) -> T {
        self.lower
    }

    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn shape(&self) -> T {
        self.shape
    }

    pub fn cdf(&self, x: T) -> Result<T> {
        self.cdf_with(x, OutOfRange::Error)
    }

    pub fn cdf_with(&self, x: T, policy: OutOfRange) -> Result<T> {
        let x = if x < self.lower || x > self.upper || x.is_nan() {
            match policy {
                OutOfRange::Error => {
                    return Err(Error::domain(format!(
                        "{x} outside the support [{}, {}]",
                        self.lower, self.upper
                    )))
                }
                OutOfRange::Clamp if x.is_nan() => return Err(Error::domain("NaN argument")),
                OutOfRange::Clamp => x.max(self.lower).min(self.upper),
            }
        } else {
            x
        };
        Ok(((x - self.lower) / (self.upper - self.lower)).powf(self.shape))
    }

    /// Inverse CDF `l + (u - l) p^(1/β)`.
    pub fn quantile(&self, p: T) -> Result<T> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        Ok(self.lower + (self.upper - self.lower) * p.powf(self.shape.recip()))
    }

    pub fn mean(&self) -> T {
        (self.upper * self.shape + self.lower) / (self.shape + T::one())
    }

    pub fn variance(&self) -> T {
        let one = T::one();
        let width = self.upper - self.lower;
        self.shape * width * width
            / ((self.shape + one) * (self.shape + one) * (self.shape + one + one))
    }

    /// `(mean, variance)`.
    pub fn moments(&self) -> (T, T) {
        (self.mean(), self.variance())
    }
}

/// Route-specific eUnit perception variance at travel time `g` inside `(l, u)`.
///
/// Uses the shape `β = (g - l) / (u - g)` implied by matching the distribution
/// mean to `g`; vanishes at either bound.
pub fn eunit_variance<T: Scalar>(time: T, lower: T, upper: T) -> Result<T> {
    if !(time > lower && time < upper) {
        return Err(Error::domain(format!(
            "eUnit variance needs {lower} < g < {upper}, got {time}"
        )));
    }
    let one = T::one();
    let beta = (time - lower) / (upper - time);
    let width = upper - lower;
    Ok(beta * width * width / ((beta + one) * (beta + one) * (beta + one + one)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cdf_and_quantile_examples() {
        let uni = ExpUniform::new(0.0, 10.0, 1.0).unwrap();
        assert_eq!(uni.cdf(5.0).unwrap(), 0.5);
        let sq = ExpUniform::new(0.0, 1.0, 2.0).unwrap();
        assert_eq!(sq.cdf(0.5).unwrap(), 0.25);
        assert_eq!(sq.quantile(0.25).unwrap(), 0.5);
        assert_eq!(sq.cdf(0.0).unwrap(), 0.0);
        assert_eq!(sq.cdf(1.0).unwrap(), 1.0);
    }

    #[test]
    fn out_of_support() {
        let d = ExpUniform::new(1.0, 2.0, 3.0).unwrap();
        assert!(d.cdf(2.5).is_err());
        assert_eq!(d.cdf_with(2.5, OutOfRange::Clamp).unwrap(), 1.0);
        assert_eq!(d.cdf_with(-4.0, OutOfRange::Clamp).unwrap(), 0.0);
        assert!(d.quantile(1.5).is_err());
        assert!(ExpUniform::new(2.0, 1.0, 1.0).is_err());
        assert!(ExpUniform::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let (m, v): (f64, f64) = ExpUniform::new(0.0, 10.0, 1.0).unwrap().moments();
        assert_relative_eq!(m, 5.0);
        assert_relative_eq!(v, 100.0 / 12.0, epsilon = 1e-12);
        assert_relative_eq!(ExpUniform::new(0.0, 4.0, 3.0).unwrap().mean(), 3.0);
        let (m, v): (f64, f64) = ExpUniform::new(0.0, 1.0, 1e6).unwrap().moments();
        assert!((m - 1.0).abs() < 1e-4);
        assert!(v < 1e-4);
    }

    #[test]
    fn variance_examples() {
        assert_relative_eq!(eunit_variance(5.0, 0.0, 10.0).unwrap(), 100.0 / 12.0, epsilon = 1e-12);
        // β = 0.25: 0.25·100 / (1.25²·2.25) = 64/9
        assert_relative_eq!(eunit_variance(2.0, 0.0, 10.0).unwrap(), 64.0 / 9.0, epsilon = 1e-12);
        let eps = 1e-6 * 10.0;
        assert!(eunit_variance(eps, 0.0, 10.0).unwrap() < 1e-3);
        assert!(eunit_variance(10.0 - eps, 0.0, 10.0).unwrap() < 1e-3);
        assert!(eunit_variance(0.0, 0.0, 10.0).is_err());
        assert!(eunit_variance(10.0, 0.0, 10.0).is_err());
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf(p in 0.0f64..=1.0, beta in 0.1f64..20.0, l in -5.0f64..5.0, w in 0.1f64..10.0) {
            let d = ExpUniform::new(l, l + w, beta).unwrap();
            let x = d.quantile(p).unwrap();
            prop_assert!((d.cdf_with(x, OutOfRange::Clamp).unwrap() - p).abs() <= 1e-12);
        }

        #[test]
        fn variance_matches_distribution(l in -5.0f64..5.0, w in 0.1f64..20.0, t in 0.001f64..0.999) {
            let u = l + w;
            let g = l + t * w;
            let beta = (g - l) / (u - g);
            let direct = eunit_variance(g, l, u).unwrap();
            let dist = ExpUniform::new(l, u, beta).unwrap().variance();
            prop_assert!((direct - dist).abs() <= 1e-12 * dist.abs().max(1e-300));
        }

        #[test]
        fn cdf_is_monotone(beta in 0.1f64..10.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let d = ExpUniform::new(0.0, 1.0, beta).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(d.cdf(lo).unwrap() <= d.cdf(hi).unwrap());
        }
    }
}
