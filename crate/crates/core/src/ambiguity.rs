//! Smooth-ambiguity distortions and their penalised worst-case duals.
//!
//! For a concave distortion `v` and a reference prior `P` on the scenarios,
//! the smooth objective of a stopping rule with per-scenario expected payoffs
//! `x` is the certainty equivalent `v^{-1}(sum_i P_i v(x_i))`. It equals
//! `inf_Q R(Q, sum_i Q_i x_i)` where `R` is one of the closed forms below:
//!
//! * power `lambda`: `R(Q, s) = s 1{s>0} (E_P[(dQ/dP)^{lambda/(lambda-1)}])^{(1-lambda)/lambda}`
//! * log: `R(Q, s) = s 1{s>0} exp(-E_P[log dQ/dP])`
//! * exponential `gamma`: `R(Q, s) = s + KL(Q | P) / gamma`
//!
//! Infinite penalty factors follow the convention `R = +inf` for `s >= 0` and
//! `R = 0` for `s < 0`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::SimplexPoint;

/// Finite stand-in for `+inf` handed to derivative-free optimisers.
pub const INFINITY_SENTINEL: f64 = 1e18;

/// A real number or one of the two infinities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedValue {
    Finite(f64),
    PosInf,
    NegInf,
}

impl ExtendedValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedValue::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedValue::Finite(_))
    }

    /// Unwraps a finite value; panics on an infinity.
    pub fn unwrap(self) -> f64 {
        self.finite().unwrap_or_else(|| panic!("expected a finite value, got {self}"))
    }

    /// Value clamped to `[-1e18, 1e18]` plus a flag telling whether the
    /// clamp replaced an infinity.
    pub fn sentinel(self) -> (f64, bool) {
        match self {
            ExtendedValue::Finite(v) => (v.clamp(-INFINITY_SENTINEL, INFINITY_SENTINEL), false),
            ExtendedValue::PosInf => (INFINITY_SENTINEL, true),
            ExtendedValue::NegInf => (-INFINITY_SENTINEL, true),
        }
    }

    fn rank(self) -> (i8, f64) {
        match self {
            ExtendedValue::NegInf => (-1, 0.0),
            ExtendedValue::Finite(v) => (0, v),
            ExtendedValue::PosInf => (1, 0.0),
        }
    }
}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let (a, x) = self.rank();
        let (b, y) = other.rank();
        match a.cmp(&b) {
            Ordering::Equal => x.partial_cmp(&y),
            o => Some(o),
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(v) => write!(f, "{v}"),
            ExtendedValue::PosInf => write!(f, "+inf"),
            ExtendedValue::NegInf => write!(f, "-inf"),
        }
    }
}

/// Concave distortion describing the attitude towards scenario ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AmbiguityFunction {
    /// `x^lambda` for `lambda` in (0, 1), `-x^lambda` for `lambda < 0`.
    Power { lambda: f64 },
    Log,
    /// `-exp(-gamma x)`.
    Exponential { gamma: f64 },
}

impl AmbiguityFunction {
    pub fn power(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda == 0.0 || lambda >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "power exponent must lie in (-inf, 0) or (0, 1), got {lambda}"
            )));
        }
        Ok(AmbiguityFunction::Power { lambda })
    }

    pub fn exponential(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        Ok(AmbiguityFunction::Exponential { gamma })
    }

    /// The distortion `v(x)`.
    pub fn v_apply(&self, x: f64) -> ExtendedValue {
        use ExtendedValue::*;
        match *self {
            AmbiguityFunction::Power { lambda } if lambda > 0.0 => {
                if x >= 0.0 {
                    Finite(x.powf(lambda))
                } else {
                    NegInf
                }
            }
            AmbiguityFunction::Power { lambda } => {
                if x > 0.0 {
                    Finite(-x.powf(lambda))
                } else {
                    NegInf
                }
            }
            AmbiguityFunction::Log => {
                if x > 0.0 {
                    Finite(x.ln())
                } else {
                    NegInf
                }
            }
            AmbiguityFunction::Exponential { gamma } => Finite(-(-gamma * x).exp()),
        }
    }

    /// Inverse of [`Self::v_apply`] on its finite range.
    pub fn v_inverse(&self, y: f64) -> Result<f64> {
        match *self {
            AmbiguityFunction::Power { lambda } if lambda > 0.0 => {
                if y >= 0.0 {
                    Ok(y.powf(1.0 / lambda))
                } else {
                    Err(Error::OutOfRange(y))
                }
            }
            AmbiguityFunction::Power { lambda } => {
                if y < 0.0 {
                    Ok((-y).powf(1.0 / lambda))
                } else {
                    Err(Error::OutOfRange(y))
                }
            }
            AmbiguityFunction::Log => Ok(y.exp()),
            AmbiguityFunction::Exponential { gamma } => {
                if y < 0.0 {
                    Ok(-(-y).ln() / gamma)
                } else {
                    Err(Error::OutOfRange(y))
                }
            }
        }
    }

    /// Certainty equivalent `v^{-1}(sum_i p_i v(x_i))`.
    ///
    /// Evaluated in a rescaled form that never leaves floating-point range;
    /// scenarios with zero prior weight do not contribute.
    pub fn smooth_objective(&self, p: &SimplexPoint, values: &[f64]) -> ExtendedValue {
        use ExtendedValue::*;
        debug_assert_eq!(p.len(), values.len());
        let terms: Vec<(f64, f64)> =
            p.weights().iter().zip(values).filter(|(w, _)| **w > 0.0).map(|(w, x)| (*w, *x)).collect();
        match *self {
            AmbiguityFunction::Power { lambda } => {
                let admissible = |x: f64| if lambda > 0.0 { x >= 0.0 } else { x > 0.0 };
                if terms.iter().any(|(_, x)| !admissible(*x)) {
                    return NegInf;
                }
                let scale = if lambda > 0.0 {
                    terms.iter().map(|t| t.1).fold(0.0, f64::max)
                } else {
                    terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min)
                };
                if scale == 0.0 {
                    return Finite(0.0);
                }
                let mean: f64 = terms.iter().map(|(w, x)| w * (x / scale).powf(lambda)).sum();
                Finite(scale * mean.powf(1.0 / lambda))
            }
            AmbiguityFunction::Log => {
                if terms.iter().any(|(_, x)| *x <= 0.0) {
                    return NegInf;
                }
                Finite(terms.iter().map(|(w, x)| w * x.ln()).sum::<f64>().exp())
            }
            AmbiguityFunction::Exponential { gamma } => {
                let m = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
                let s: f64 = terms.iter().map(|(w, x)| w * (-gamma * (x - m)).exp()).sum();
                Finite(m - s.ln() / gamma)
            }
        }
    }

    /// Partial derivatives of the certainty equivalent with respect to each
    /// scenario value. `None` when the certainty equivalent is not finite or
    /// not differentiable (a zero value under power/log).
    pub fn marginal_weights(&self, p: &SimplexPoint, values: &[f64]) -> Option<Vec<f64>> {
        let ce = self.smooth_objective(p, values).finite()?;
        let w = p.weights();
        let grad: Vec<f64> = match *self {
            AmbiguityFunction::Power { lambda } => {
                if ce <= 0.0 {
                    return None;
                }
                w.iter()
                    .zip(values)
                    .map(|(pi, x)| if *pi > 0.0 { pi * (x / ce).powf(lambda - 1.0) } else { 0.0 })
                    .collect()
            }
            AmbiguityFunction::Log => {
                w.iter().zip(values).map(|(pi, x)| if *pi > 0.0 { pi * ce / x } else { 0.0 }).collect()
            }
            AmbiguityFunction::Exponential { gamma } => w
                .iter()
                .zip(values)
                .map(|(pi, x)| if *pi > 0.0 { pi * (-gamma * (x - ce)).exp() } else { 0.0 })
                .collect(),
        };
        grad.iter().all(|g| g.is_finite()).then_some(grad)
    }

    /// The measure `Q` attaining `inf_Q R(Q, E^Q[values])`: the normalised
    /// gradient of the certainty equivalent.
    pub fn minimizing_measure(&self, p: &SimplexPoint, values: &[f64]) -> Result<SimplexPoint> {
        let grad = self.marginal_weights(p, values).ok_or_else(|| {
            Error::InvalidParameter("certainty equivalent is not differentiable at these values".into())
        })?;
        SimplexPoint::make_simplex(&grad)
    }

    /// Multiplicative penalty (power, log) or relative entropy (exponential)
    /// of `q` against the reference prior `p`.
    pub fn penalty_factor(&self, q: &SimplexPoint, p: &SimplexPoint) -> Result<ExtendedValue> {
        use ExtendedValue::*;
        check_absolute_continuity(q, p)?;
        let pairs = q.weights().iter().zip(p.weights()).filter(|(_, pi)| **pi > 0.0);
        match *self {
            AmbiguityFunction::Power { lambda } => {
                let e = lambda / (lambda - 1.0);
                let mut sum = 0.0;
                for (qi, pi) in pairs {
                    if *qi == 0.0 {
                        if e < 0.0 {
                            return Ok(PosInf);
                        }
                        continue;
                    }
                    sum += pi * (qi / pi).powf(e);
                }
                Ok(Finite(sum.powf((1.0 - lambda) / lambda)))
            }
            AmbiguityFunction::Log => {
                let mut sum = 0.0;
                for (qi, pi) in pairs {
                    if *qi == 0.0 {
                        return Ok(PosInf);
                    }
                    sum += pi * (qi / pi).ln();
                }
                Ok(Finite((-sum).exp()))
            }
            AmbiguityFunction::Exponential { .. } => Ok(Finite(relative_entropy(q, p))),
        }
    }

    /// `R(q, s)`.
    pub fn r_value(&self, q: &SimplexPoint, p: &SimplexPoint, s: f64) -> Result<ExtendedValue> {
        use ExtendedValue::*;
        let penalty = self.penalty_factor(q, p)?;
        Ok(match (*self, penalty) {
            (AmbiguityFunction::Exponential { gamma }, Finite(kl)) => Finite(s + kl / gamma),
            (_, PosInf) => {
                if s >= 0.0 {
                    PosInf
                } else {
                    Finite(0.0)
                }
            }
            (_, Finite(factor)) => Finite(if s > 0.0 { s * factor } else { 0.0 }),
            (_, NegInf) => unreachable!("penalties are never -inf"),
        })
    }

    /// `G(tau, q) = R(q, E^{P^q}[Y_tau])` from per-scenario expectations.
    pub fn g_value(&self, q: &SimplexPoint, p: &SimplexPoint, values: &[f64]) -> Result<ExtendedValue> {
        if values.len() != q.len() || q.len() != p.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} scenarios",
                values.len(),
                q.len()
            )));
        }
        self.r_value(q, p, q.expectation(values))
    }
}

impl fmt::Display for AmbiguityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AmbiguityFunction::Power { lambda } => write!(f, "power({lambda})"),
            AmbiguityFunction::Log => write!(f, "log"),
            AmbiguityFunction::Exponential { gamma } => write!(f, "exponential({gamma})"),
        }
    }
}

fn check_absolute_continuity(q: &SimplexPoint, p: &SimplexPoint) -> Result<()> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} scenarios", q.len(), p.len())));
    }
    for (i, (qi, pi)) in q.weights().iter().zip(p.weights()).enumerate() {
        if *qi > 0.0 && *pi == 0.0 {
            return Err(Error::AbsoluteContinuityViolated { index: i, mass: *qi });
        }
    }
    Ok(())
}

/// `sum_i q_i log(q_i / p_i)` with `0 log 0 = 0`. Assumes `q << p`.
pub fn relative_entropy(q: &SimplexPoint, p: &SimplexPoint) -> f64 {
    q.weights()
        .iter()
        .zip(p.weights())
        .filter(|(qi, _)| **qi > 0.0)
        .map(|(qi, pi)| qi * (qi / pi).ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sp(w: &[f64]) -> SimplexPoint {
        SimplexPoint::make_simplex(w).unwrap()
    }

    #[test]
    fn constructor_validation() {
        assert!(AmbiguityFunction::power(0.0).is_err());
        assert!(AmbiguityFunction::power(1.0).is_err());
        assert!(AmbiguityFunction::power(1.5).is_err());
        assert!(AmbiguityFunction::power(-3.0).is_ok());
        assert!(AmbiguityFunction::exponential(0.0).is_err());
    }

    #[test]
    fn v_apply_examples() {
        let sqrt = AmbiguityFunction::power(0.5).unwrap();
        assert_eq!(sqrt.v_apply(4.0), ExtendedValue::Finite(2.0));
        assert_eq!(sqrt.v_apply(-1.0), ExtendedValue::NegInf);
        assert_eq!(AmbiguityFunction::Log.v_apply(0.0), ExtendedValue::NegInf);
        let exp1 = AmbiguityFunction::exponential(1.0).unwrap();
        assert_eq!(exp1.v_apply(0.0), ExtendedValue::Finite(-1.0));
        let neg = AmbiguityFunction::power(-1.0).unwrap();
        assert_eq!(neg.v_apply(2.0), ExtendedValue::Finite(-0.5));
        assert_eq!(neg.v_apply(0.0), ExtendedValue::NegInf);
    }

    #[test]
    fn v_inverse_examples() {
        assert_abs_diff_eq!(AmbiguityFunction::power(0.5).unwrap().v_inverse(2.0).unwrap(), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(AmbiguityFunction::exponential(2.0).unwrap().v_inverse(-1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(AmbiguityFunction::Log.v_inverse(0.0).unwrap(), 1.0);
        assert_eq!(AmbiguityFunction::power(0.5).unwrap().v_inverse(-1.0), Err(Error::OutOfRange(-1.0)));
        assert!(AmbiguityFunction::power(-2.0).unwrap().v_inverse(0.5).is_err());
        assert!(AmbiguityFunction::exponential(1.0).unwrap().v_inverse(0.0).is_err());
    }

    #[test]
    fn smooth_objective_examples() {
        let p3 = SimplexPoint::uniform(3);
        for f in [
            AmbiguityFunction::power(0.5).unwrap(),
            AmbiguityFunction::power(-2.0).unwrap(),
            AmbiguityFunction::Log,
            AmbiguityFunction::exponential(1.5).unwrap(),
        ] {
            assert_abs_diff_eq!(f.smooth_objective(&p3, &[1.7, 1.7, 1.7]).unwrap(), 1.7, epsilon = 1e-14);
            assert_abs_diff_eq!(f.smooth_objective(&sp(&[1.0, 0.0]), &[0.8, 5.0]).unwrap(), 0.8, epsilon = 1e-14);
        }
        let sqrt = AmbiguityFunction::power(0.5).unwrap();
        let half = SimplexPoint::uniform(2);
        assert_abs_diff_eq!(sqrt.smooth_objective(&half, &[1.0, 4.0]).unwrap(), 2.25, epsilon = 1e-14);
        assert_eq!(sqrt.smooth_objective(&half, &[-0.1, 4.0]), ExtendedValue::NegInf);
        // a zero-weight scenario may be negative
        assert!(sqrt.smooth_objective(&sp(&[1.0, 0.0]), &[1.0, -4.0]).is_finite());
    }

    #[test]
    fn smooth_objective_agrees_with_v_route() {
        let p = sp(&[0.2, 0.5, 0.3]);
        let x = [0.7, 1.3, 2.9];
        for f in [
            AmbiguityFunction::power(0.3).unwrap(),
            AmbiguityFunction::power(-4.0).unwrap(),
            AmbiguityFunction::Log,
            AmbiguityFunction::exponential(0.8).unwrap(),
        ] {
            let avg: f64 = p.weights().iter().zip(&x).map(|(w, xi)| w * f.v_apply(*xi).unwrap()).sum();
            assert_abs_diff_eq!(f.smooth_objective(&p, &x).unwrap(), f.v_inverse(avg).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn penalty_factor_examples() {
        let p = SimplexPoint::uniform(3);
        let fs = [
            AmbiguityFunction::power(0.5).unwrap(),
            AmbiguityFunction::power(-1.0).unwrap(),
            AmbiguityFunction::Log,
        ];
        for f in fs {
            assert_abs_diff_eq!(f.penalty_factor(&p, &p).unwrap().unwrap(), 1.0, epsilon = 1e-14);
        }
        let exp = AmbiguityFunction::exponential(1.0).unwrap();
        assert_abs_diff_eq!(exp.penalty_factor(&p, &p).unwrap().unwrap(), 0.0);

        let vertex = SimplexPoint::vertex(3, 0);
        assert_eq!(fs[0].penalty_factor(&vertex, &p).unwrap(), ExtendedValue::PosInf);
        assert_eq!(fs[2].penalty_factor(&vertex, &p).unwrap(), ExtendedValue::PosInf);
        // (sum p_i (q_i/p_i)^{1/2})^{-2} = (3^{-1/2})^{-2} = 3
        assert_abs_diff_eq!(fs[1].penalty_factor(&vertex, &p).unwrap().unwrap(), 3.0, epsilon = 1e-12);

        let err = fs[1].penalty_factor(&SimplexPoint::uniform(2), &sp(&[1.0, 0.0]));
        assert_eq!(err, Err(Error::AbsoluteContinuityViolated { index: 1, mass: 0.5 }));
    }

    #[test]
    fn r_value_examples() {
        let p = SimplexPoint::uniform(3);
        let pw = AmbiguityFunction::power(0.4).unwrap();
        assert_abs_diff_eq!(pw.r_value(&p, &p, 2.0).unwrap().unwrap(), 2.0, epsilon = 1e-14);
        let vertex = SimplexPoint::vertex(3, 1);
        assert_eq!(pw.r_value(&vertex, &p, -1.0).unwrap(), ExtendedValue::Finite(0.0));
        assert_eq!(pw.r_value(&vertex, &p, 0.0).unwrap(), ExtendedValue::PosInf);
        assert_eq!(pw.r_value(&vertex, &p, 1.0).unwrap(), ExtendedValue::PosInf);

        // Entropic dual: s + KL(q | p) / gamma.
        let exp = AmbiguityFunction::exponential(1.0).unwrap();
        let q = sp(&[0.75, 0.25]);
        let half = SimplexPoint::uniform(2);
        let kl = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert_abs_diff_eq!(exp.r_value(&q, &half, 1.0).unwrap().unwrap(), 1.0 + kl, epsilon = 1e-14);
    }

    #[test]
    fn g_value_examples() {
        let p = sp(&[0.2, 0.3, 0.5]);
        let values = [0.5, 1.0, 3.0];
        for f in [AmbiguityFunction::power(0.5).unwrap(), AmbiguityFunction::Log] {
            assert_abs_diff_eq!(f.g_value(&p, &p, &values).unwrap().unwrap(), p.expectation(&values), epsilon = 1e-14);
        }
        let strong = AmbiguityFunction::power(-50.0).unwrap();
        let q = sp(&[0.6, 0.1, 0.3]);
        let factor = strong.penalty_factor(&q, &p).unwrap().unwrap();
        assert!((factor - 1.0).abs() < 0.01, "factor {factor}");
        let exp = AmbiguityFunction::exponential(1.0).unwrap();
        let half = SimplexPoint::uniform(2);
        assert_abs_diff_eq!(exp.g_value(&half, &half, &[2.0, 0.0]).unwrap().unwrap(), 1.0);
    }

    #[test]
    fn minimizing_measure_attains_certainty_equivalent() {
        let p = sp(&[0.2, 0.5, 0.3]);
        let x = [0.7, 1.3, 2.9];
        for f in [
            AmbiguityFunction::power(0.6).unwrap(),
            AmbiguityFunction::power(-3.0).unwrap(),
            AmbiguityFunction::Log,
            AmbiguityFunction::exponential(2.0).unwrap(),
        ] {
            let q = f.minimizing_measure(&p, &x).unwrap();
            let g = f.g_value(&q, &p, &x).unwrap().unwrap();
            assert_abs_diff_eq!(g, f.smooth_objective(&p, &x).unwrap(), epsilon = 1e-12);
        }
    }

    fn kinds() -> impl Strategy<Value = AmbiguityFunction> {
        prop_oneof![
            (0.05f64..0.95).prop_map(|l| AmbiguityFunction::power(l).unwrap()),
            (-8.0f64..-0.05).prop_map(|l| AmbiguityFunction::power(l).unwrap()),
            Just(AmbiguityFunction::Log),
            (0.1f64..5.0).prop_map(|g| AmbiguityFunction::exponential(g).unwrap()),
        ]
    }

    fn simplex3() -> impl Strategy<Value = SimplexPoint> {
        prop::collection::vec(0.01f64..1.0, 3).prop_map(|w| SimplexPoint::make_simplex(&w).unwrap())
    }

    proptest! {
        #[test]
        fn v_round_trip(f in kinds(), x in 0.01f64..20.0) {
            let y = f.v_apply(x).unwrap();
            let back = f.v_inverse(y).unwrap();
            prop_assert!((back - x).abs() <= 1e-10 * x.max(1.0), "{f}: {x} -> {back}");
        }

        #[test]
        fn r_is_nondecreasing_in_s(f in kinds(), q in simplex3(), p in simplex3(), s1 in -5.0f64..5.0, ds in 0.0f64..5.0) {
            let a = f.r_value(&q, &p, s1).unwrap();
            let b = f.r_value(&q, &p, s1 + ds).unwrap();
            prop_assert!(a <= b);
        }

        #[test]
        fn jensen(f in kinds(), p in simplex3(), x in prop::collection::vec(0.1f64..10.0, 3)) {
            let ce = f.smooth_objective(&p, &x).unwrap();
            let mean = p.expectation(&x);
            prop_assert!(ce <= mean + 1e-10);
            let spread = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
            if spread > 1e-3 {
                prop_assert!(ce < mean - 1e-10);
            }
        }

        #[test]
        fn jensen_equality_for_constants(f in kinds(), p in simplex3(), c in 0.1f64..10.0) {
            let ce = f.smooth_objective(&p, &[c, c, c]).unwrap();
            prop_assert!((ce - c).abs() <= 1e-10 * c.max(1.0));
        }

        #[test]
        fn monotone_in_lambda(p in simplex3(), x in prop::collection::vec(0.1f64..10.0, 3)) {
            let lambdas = [-5.0, -2.0, -1.0, 0.5, 0.9];
            let ces: Vec<f64> = lambdas.iter()
                .map(|l| AmbiguityFunction::power(*l).unwrap().smooth_objective(&p, &x).unwrap())
                .collect();
            for w in ces.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-12);
            }
        }

        #[test]
        fn dual_never_undercuts_certainty_equivalent(f in kinds(), q in simplex3(), p in simplex3(),
                                                     x in prop::collection::vec(0.1f64..10.0, 3)) {
            let g = f.g_value(&q, &p, &x).unwrap();
            let ce = f.smooth_objective(&p, &x).unwrap();
            prop_assert!(g >= ExtendedValue::Finite(ce - 1e-10 * ce.abs().max(1.0)));
        }
    }
}
