//! Closed-form route-choice kernels.
//!
//! All kernels take route travel times (disutilities) and return a
//! [`ProbVector`]. The logit and weibit models give every route positive
//! probability; the bounded-choice and eUnit models can assign exactly zero.

mod erum;
mod exp_uniform;

pub use erum::{
    binomial_standard_error, erum_choice_frequencies, erum_choice_frequencies_with_workers,
    erum_sample_choice, ERUM_CHUNK,
};
pub use exp_uniform::{eunit_variance, ExpUniform, OutOfRange};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Guard used for the eUnit denominator `g - l`. Never engaged when `g > l`.
const DENOMINATOR_FLOOR: f64 = 1e-300;

/// Choice probabilities together with the used/unused support mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<T> {
    probs: Vec<T>,
    used: Vec<bool>,
}

impl<T: Scalar> ProbVector<T> {
    /// Normalizes non-negative weights; zero weights become unused routes.
    pub(crate) fn from_weights(weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::domain(format!(
                "choice weights must have a positive finite sum, got {total}"
            )));
        }
        let used = weights.iter().map(|&w| w > T::zero()).collect();
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(ProbVector { probs, used })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn used(&self) -> &[bool] {
        &self.used
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }
}

impl<T> std::ops::Index<usize> for ProbVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.probs[i]
    }
}

/// Parameterizations of the supported route-choice models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChoiceModelParams<T> {
    /// Multinomial logit with dispersion `ϱ > 0`.
    Mnl { dispersion: T },
    /// Multinomial weibit with shape `> 0` and location `≥ 0`.
    Mnw { shape: T, location: T },
    /// Bounded choice with scale `θ > 0` and threshold `ρ ≥ 0`.
    BoundedChoice { scale: T, threshold: T },
    /// eUnit with explicit perceived-time bounds `lower < upper`.
    EUnit { lower: T, upper: T },
    /// eUnit with only the bound range `b = u - l > 0`; the lower bound is
    /// determined by the equilibrium.
    EUnitRange { bound_range: T },
}

impl<T: Scalar> ChoiceModelParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ChoiceModelParams::Mnl { dispersion } => dispersion > T::zero(),
            ChoiceModelParams::Mnw { shape, location } => shape > T::zero() && location >= T::zero(),
            ChoiceModelParams::BoundedChoice { scale, threshold } => {
                scale > T::zero() && threshold >= T::zero()
            }
            ChoiceModelParams::EUnit { lower, upper } => upper > lower,
            ChoiceModelParams::EUnitRange { bound_range } => bound_range > T::zero(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid choice model parameters {self:?}")))
        }
    }

    /// Choice probabilities at the given route times.
    pub fn probabilities(&self, times: &[T]) -> Result<ProbVector<T>> {
        self.validate()?;
        match *self {
            ChoiceModelParams::Mnl { dispersion } => mnl_prob(times, dispersion),
            ChoiceModelParams::Mnw { shape, location } => mnw_prob(times, shape, location),
            ChoiceModelParams::BoundedChoice { scale, threshold } => bc_prob(times, scale, threshold),
            ChoiceModelParams::EUnit { lower, upper } => eunit_prob(times, lower, upper),
            ChoiceModelParams::EUnitRange { .. } => Err(Error::domain(
                "eUnit probabilities need explicit bounds; solve the equilibrium to obtain the lower bound",
            )),
        }
    }
}

fn check_times<T: Scalar>(times: &[T]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Empty("route time vector".into()));
    }
    if let Some(g) = times.iter().find(|g| !g.is_finite()) {
        return Err(Error::domain(format!("non-finite route time {g}")));
    }
    Ok(())
}

fn min_of<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().fold(T::infinity(), T::min)
}

/// Multinomial logit: `P_r ∝ exp(-ϱ g_r)`, evaluated with a max-shift.
pub fn mnl_prob<T: Scalar>(times: &[T], dispersion: T) -> Result<ProbVector<T>> {
    check_times(times)?;
    if !(dispersion > T::zero()) {
        return Err(Error::domain(format!("MNL dispersion must be positive, got {dispersion}")));
    }
    let g_min = min_of(times);
    ProbVector::from_weights(times.iter().map(|&g| (-dispersion * (g - g_min)).exp()).collect())
}

/// Multinomial weibit: `P_r ∝ (g_r - ς)^(-shape)`.
pub fn mnw_prob<T: Scalar>(times: &[T], shape: T, location: T) -> Result<ProbVector<T>> {
    check_times(times)?;
    if !(shape > T::zero()) {
        return Err(Error::domain(format!("MNW shape must be positive, got {shape}")));
    }
    if let Some(g) = times.iter().find(|&&g| !(g > location)) {
        return Err(Error::domain(format!(
            "MNW requires every route time above the location {location}, got {g}"
        )));
    }
    // Shift in log space so the shortest route has weight 1.
    let log_min = (min_of(times) - location).ln();
    ProbVector::from_weights(
        times
            .iter()
            .map(|&g| (-shape * ((g - location).ln() - log_min)).exp())
            .collect(),
    )
}

/// Perception variance of an MNW route whose (shifted) Weibull mean is `g - ς`.
pub fn mnw_variance<T: Scalar>(time: T, shape: T, location: T) -> Result<T> {
    if !(shape > T::zero()) {
        return Err(Error::domain(format!("MNW shape must be positive, got {shape}")));
    }
    if !(time >= location) || !time.is_finite() {
        return Err(Error::domain(format!(
            "MNW variance requires time ≥ location ({time} < {location})"
        )));
    }
    let k = shape.as_f64();
    let g1 = statrs::function::gamma::gamma(1.0 + 1.0 / k);
    let g2 = statrs::function::gamma::gamma(1.0 + 2.0 / k);
    let scale = (time - location).as_f64() / g1;
    Ok(T::lit(scale * scale * (g2 - g1 * g1)))
}

/// Bounded choice: `P_r ∝ (exp(-θ (g_r - min g - ρ)) - 1)+`.
///
/// Routes whose gap to the minimum reaches `ρ` get exactly zero. At `ρ = 0`
/// every weight vanishes; the limit `ρ → 0+` splits the demand equally
/// between the minimum-time routes, which is what is returned.
pub fn bc_prob<T: Scalar>(times: &[T], scale: T, threshold: T) -> Result<ProbVector<T>> {
    check_times(times)?;
    if !(scale > T::zero()) {
        return Err(Error::domain(format!("BC scale must be positive, got {scale}")));
    }
    if !(threshold >= T::zero()) || !threshold.is_finite() {
        return Err(Error::domain(format!("BC threshold must be non-negative, got {threshold}")));
    }
    let g_min = min_of(times);
    let span = scale * threshold;
    let weights: Vec<T> = times
        .iter()
        .map(|&g| {
            let gap = g - g_min;
            if gap >= threshold {
                T::zero()
            } else if span <= T::one() {
                (scale * (threshold - gap)).exp_m1()
            } else {
                // Same weight divided by exp(θρ); avoids overflow for large θρ.
                ((-scale * gap).exp() - (-span).exp()).pos()
            }
        })
        .collect();
    if weights.iter().all(|&w| w == T::zero()) {
        return ProbVector::from_weights(
            times
                .iter()
                .map(|&g| if g == g_min { T::one() } else { T::zero() })
                .collect(),
        );
    }
    ProbVector::from_weights(weights)
}

/// eUnit weights `((u - g_r) / (g_r - l))+`.
pub(crate) fn eunit_weights<T: Scalar>(times: &[T], lower: T, upper: T) -> Result<Vec<T>> {
    check_times(times)?;
    if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
        return Err(Error::domain(format!(
            "eUnit bounds require finite lower < upper, got ({lower}, {upper})"
        )));
    }
    if let Some(g) = times.iter().find(|&&g| !(g > lower)) {
        return Err(Error::domain(format!(
            "route time {g} is not above the perceived-time lower bound {lower}"
        )));
    }
    let floor = T::from_f64(DENOMINATOR_FLOOR).unwrap_or_else(T::min_positive_value);
    Ok(times
        .iter()
        .map(|&g| (upper - g).pos() / (g - lower).max(floor))
        .collect())
}

/// eUnit choice probabilities from route times and perceived-time bounds.
///
/// Routes at or beyond the upper bound get exactly zero probability. A route
/// at or below the lower bound is a domain error.
pub fn eunit_prob<T: Scalar>(times: &[T], lower: T, upper: T) -> Result<ProbVector<T>> {
    let weights = eunit_weights(times, lower, upper)?;
    if weights.iter().all(|&w| w == T::zero()) {
        return Err(Error::EmptySupport {
            lower: lower.as_f64(),
            upper: upper.as_f64(),
        });
    }
    ProbVector::from_weights(weights)
}

/// eUnit probabilities in utility orientation: `P_r ∝ (V_r - l) / (u - V_r)`.
pub fn eunit_prob_from_utilities<T: Scalar>(utilities: &[T], lower: T, upper: T) -> Result<ProbVector<T>> {
    check_times(utilities)?;
    if !(upper > lower) {
        return Err(Error::domain(format!("eUnit bounds require lower < upper, got ({lower}, {upper})")));
    }
    if let Some(v) = utilities.iter().find(|&&v| !(v > lower && v < upper)) {
        return Err(Error::domain(format!(
            "utility {v} outside the open interval ({lower}, {upper})"
        )));
    }
    ProbVector::from_weights(utilities.iter().map(|&v| (v - lower) / (upper - v)).collect())
}

/// Sensitivity-function families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensitivityModel<T> {
    Mnl { dispersion: T },
    Mnw { shape: T },
    EUnit { lower: T, upper: T },
}

/// Traveler sensitivity `S(t)` such that `P_r ∝ exp(S(g_r))`.
pub fn sensitivity<T: Scalar>(model: SensitivityModel<T>, t: T) -> Result<T> {
    match model {
        SensitivityModel::Mnl { dispersion } => {
            if !(dispersion > T::zero()) {
                return Err(Error::domain("MNL dispersion must be positive"));
            }
            Ok(-dispersion * t)
        }
        SensitivityModel::Mnw { shape } => {
            if !(shape > T::zero()) || !(t > T::zero()) {
                return Err(Error::domain(format!("MNW sensitivity needs shape > 0 and t > 0 (t = {t})")));
            }
            Ok(-shape * t.ln())
        }
        SensitivityModel::EUnit { lower, upper } => {
            if !(t > lower && t < upper) {
                return Err(Error::domain(format!(
                    "eUnit sensitivity needs {lower} < t < {upper}, got {t}"
                )));
            }
            Ok(-((t - lower) / (upper - t)).ln())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn assert_probs(p: &ProbVector<f64>, expected: &[f64], tol: f64) {
        assert_eq!(p.len(), expected.len());
        for (a, b) in p.probs().iter().zip(expected) {
            assert!((a - b).abs() <= tol, "{:?} vs {:?}", p.probs(), expected);
        }
    }

    #[test]
    fn mnl_examples() {
        assert_probs(&mnl_prob(&[7.0, 7.0, 7.0], 1.0).unwrap(), &[1.0 / 3.0; 3], 1e-15);
        // 1/(1+e^-1) evaluated independently
        assert_probs(&mnl_prob(&[1.0, 2.0], 1.0).unwrap(), &[0.731_058_578_630_004_9, 0.268_941_421_369_995_1], 1e-12);
        assert_probs(&mnl_prob(&[5.0], 3.0).unwrap(), &[1.0], 0.0);
        assert!(matches!(mnl_prob::<f64>(&[], 1.0), Err(Error::Empty(_))));
        assert!(mnl_prob(&[1.0], 0.0).is_err());
        assert!(mnl_prob(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn mnl_survives_large_times() {
        let p = mnl_prob::<f64>(&[1.0e5, 1.0e5 + 1.0], 10.0).unwrap();
        assert!(p.probs().iter().all(|x| x.is_finite()));
        assert_relative_eq!(p.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mnw_examples() {
        assert_probs(&mnw_prob(&[3.0, 3.0], 2.5, 1.0).unwrap(), &[0.5, 0.5], 1e-15);
        assert_probs(&mnw_prob(&[1.0, 2.0], 2.0, 0.0).unwrap(), &[0.8, 0.2], 1e-14);
        let a = mnw_prob(&[1.0, 2.5, 4.0], 2.5, 0.0).unwrap();
        let b = mnw_prob(&[7.0, 17.5, 28.0], 2.5, 0.0).unwrap();
        assert_probs(&a, b.probs(), 1e-14);
        assert!(mnw_prob(&[1.0, 2.0], 2.0, 1.0).is_err());
    }

    #[test]
    fn mnw_variance_examples() {
        assert_eq!(mnw_variance(3.0, 2.5, 3.0).unwrap(), 0.0);
        assert_relative_eq!(mnw_variance(1.0, 1.0, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(mnw_variance(1.0, 2.0, 2.0).is_err());
        assert!(mnw_variance(5.0, 2.5, 0.0).unwrap() < mnw_variance(6.0, 2.5, 0.0).unwrap());
    }

    #[test]
    fn bc_examples() {
        assert_probs(&bc_prob(&[10.0, 10.0], 1.0, 5.0).unwrap(), &[0.5, 0.5], 1e-15);
        let p = bc_prob(&[10.0, 16.0], 1.0, 5.0).unwrap();
        assert_eq!(p.probs(), &[1.0, 0.0]);
        assert_eq!(p.used(), &[true, false]);
        // (e^5 - 1) / ((e^5 - 1) + (e^3 - 1))
        assert_probs(&bc_prob(&[10.0, 12.0], 1.0, 5.0).unwrap(), &[0.885_371_252_876_152_6, 0.114_628_747_123_847_4], 1e-12);
        assert!(bc_prob::<f64>(&[], 1.0, 1.0).is_err());
    }

    #[test]
    fn bc_zero_threshold_is_all_or_nothing() {
        let p = bc_prob(&[4.0, 3.0, 3.0], 1.0, 0.0).unwrap();
        assert_eq!(p.probs(), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn bc_small_and_large_span_agree() {
        // θρ straddling the branch point gives continuous weights
        let lo = bc_prob(&[1.0, 1.5], 1.0, 1.0 - 1e-12).unwrap();
        let hi = bc_prob(&[1.0, 1.5], 1.0, 1.0 + 1e-12).unwrap();
        assert_probs(&lo, hi.probs(), 1e-10);
    }

    #[test]
    fn eunit_examples() {
        let p = eunit_prob(&[5.0, 6.0, 8.0], 4.0, 8.0).unwrap();
        assert_probs(&p, &[0.75, 0.25, 0.0], 1e-15);
        assert_eq!(p.used(), &[true, true, false]);
        assert_probs(&eunit_prob(&[6.0, 6.0], 1.0, 9.0).unwrap(), &[0.5, 0.5], 1e-15);
        assert_probs(&eunit_prob(&[5.0], 4.0, 8.0).unwrap(), &[1.0], 0.0);
    }

    #[test]
    fn eunit_errors() {
        assert!(matches!(
            eunit_prob(&[9.0, 10.0], 4.0, 8.0),
            Err(Error::EmptySupport { .. })
        ));
        assert!(matches!(eunit_prob(&[4.0, 5.0], 4.0, 8.0), Err(Error::Domain(_))));
        assert!(eunit_prob(&[5.0], 8.0, 4.0).is_err());
    }

    #[test]
    fn eunit_utility_orientation() {
        assert_probs(&eunit_prob_from_utilities(&[2.0, 2.0], 0.0, 4.0).unwrap(), &[0.5, 0.5], 1e-15);
        assert_probs(&eunit_prob_from_utilities(&[3.0, 1.0], 0.0, 4.0).unwrap(), &[0.9, 0.1], 1e-15);
        assert!(eunit_prob_from_utilities(&[4.0], 0.0, 4.0).is_err());
        // β_r / Σ β_k with β_r = (V_r - l)/(u - V_r)
        let v = [0.5, 1.7, 3.2];
        let beta: Vec<f64> = v.iter().map(|x| x / (4.0 - x)).collect();
        let total: f64 = beta.iter().sum();
        let expected: Vec<f64> = beta.iter().map(|b| b / total).collect();
        assert_probs(&eunit_prob_from_utilities(&v, 0.0, 4.0).unwrap(), &expected, 1e-15);
    }

    #[test]
    fn sensitivity_examples() {
        let m = SensitivityModel::EUnit { lower: 2.0, upper: 8.0 };
        assert_eq!(sensitivity(m, 5.0).unwrap(), 0.0);
        assert!(sensitivity(m, 2.0 + 1e-9).unwrap() > 0.0);
        assert!(sensitivity(m, 8.0 - 1e-9).unwrap() < 0.0);
        assert!(sensitivity(m, 8.0).is_err());
        assert_eq!(sensitivity(SensitivityModel::Mnl { dispersion: 2.0 }, 3.0).unwrap(), -6.0);
        assert_relative_eq!(
            sensitivity(SensitivityModel::Mnw { shape: 2.5 }, 4.0).unwrap(),
            -2.5 * 4.0f64.ln()
        );
        assert!(sensitivity(SensitivityModel::Mnw { shape: 2.5 }, 0.0).is_err());
    }

    #[test]
    fn sensitivity_reproduces_probabilities() {
        // P_r = exp(S(g_r)) / Σ exp(S(g_k)) for the eUnit family
        let (l, u) = (1.0_f64, 6.0_f64);
        let g = [2.0, 3.5, 5.0];
        let s: Vec<f64> = g
            .iter()
            .map(|&t| sensitivity(SensitivityModel::EUnit { lower: l, upper: u }, t).unwrap().exp())
            .collect();
        let total: f64 = s.iter().sum();
        let p = eunit_prob(&g, l, u).unwrap();
        for (a, b) in p.probs().iter().zip(&s) {
            assert_relative_eq!(*a, b / total, epsilon = 1e-14);
        }
    }

    #[test]
    fn params_dispatch() {
        let p = ChoiceModelParams::EUnit { lower: 4.0, upper: 8.0 };
        assert_probs(&p.probabilities(&[5.0, 6.0]).unwrap(), &[0.75, 0.25], 1e-15);
        assert!(ChoiceModelParams::EUnit { lower: 2.0, upper: 2.0 }.validate().is_err());
        assert!(ChoiceModelParams::EUnitRange { bound_range: 1.0 }.probabilities(&[1.0]).is_err());
        assert!(ChoiceModelParams::Mnw { shape: 1.0, location: -1.0 }.validate().is_err());
        assert!(ChoiceModelParams::BoundedChoice { scale: 0.1, threshold: 0.0 }.validate().is_ok());
    }

    #[test]
    fn kernels_run_in_f32() {
        let p = eunit_prob(&[5.0f32, 6.0, 8.0], 4.0, 8.0).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-6);
        let p = mnl_prob(&[1.0f32, 2.0], 1.0).unwrap();
        assert!((p[0] - 0.731_059).abs() < 1e-6);
    }

    fn check_prob_vector(p: &ProbVector<f64>) {
        let total: f64 = p.probs().iter().sum();
        assert!((total - 1.0).abs() <= 1e-12, "sum {total}");
        for (x, used) in p.probs().iter().zip(p.used()) {
            assert!(*x >= 0.0);
            assert_eq!(*x > 0.0, *used);
        }
    }

    proptest! {
        #[test]
        fn prob_vectors_are_distributions(
            g in prop::collection::vec(0.5f64..40.0, 1..8),
            theta in 0.05f64..3.0,
            rho in 0.0f64..20.0,
        ) {
            check_prob_vector(&mnl_prob(&g, theta).unwrap());
            check_prob_vector(&mnw_prob(&g, theta, 0.0).unwrap());
            let bc = bc_prob(&g, theta, rho).unwrap();
            check_prob_vector(&bc);
            let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
            for (x, &gr) in bc.probs().iter().zip(&g) {
                if rho > 0.0 && gr - g_min >= rho {
                    prop_assert_eq!(*x, 0.0);
                }
            }
            let l = g_min - 0.25;
            let u = l + rho + 0.5;
            let e = eunit_prob(&g, l, u).unwrap();
            check_prob_vector(&e);
            for (x, &gr) in e.probs().iter().zip(&g) {
                if gr >= u {
                    prop_assert_eq!(*x, 0.0);
                }
            }
        }

        #[test]
        fn eunit_shift_invariance(
            g in prop::collection::vec(1.0f64..9.0, 1..6),
            shift in -50.0f64..50.0,
        ) {
            let (l, u) = (0.5, 7.0);
            prop_assume!(g.iter().any(|&x| x < u));
            let a = eunit_prob(&g, l, u).unwrap();
            let shifted: Vec<f64> = g.iter().map(|x| x + shift).collect();
            let b = eunit_prob(&shifted, l + shift, u + shift).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn eunit_monotone_dominance(
            g1 in 1.1f64..8.9,
            g2 in 1.1f64..8.9,
            dec in 0.01f64..0.09,
        ) {
            let (l, u) = (1.0, 9.0);
            let before = eunit_prob(&[g1, g2], l, u).unwrap();
            let after = eunit_prob(&[g1 - dec, g2], l, u).unwrap();
            prop_assert!(after[0] > before[0]);
        }
    }
}
