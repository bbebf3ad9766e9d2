//! Regime classification and annealed survival asymptotics.
//!
//! With `φ_K(λ) = gλ + φ(λ)`, the annealed survival probability behaves like
//! `c · t^{-κ} · e^{ρ t}` where
//!
//! | regime                     | condition                  | ρ        | κ   |
//! |----------------------------|----------------------------|----------|-----|
//! | supercritical              | `φ_K'(0) > 0`              | 0        | 0   |
//! | critical                   | `φ_K'(0) = 0`              | 0        | 1/2 |
//! | strongly subcritical       | `φ_K'(1) < 0`              | `φ_K(1)` | 0   |
//! | intermediate subcritical   | `φ_K'(1) = 0`              | `φ_K(1)` | 1/2 |
//! | weakly subcritical         | `φ_K'(0) < 0 < φ_K'(1)`    | `φ_K(τ)` | 3/2 |
//!
//! and `τ ∈ (0, 1)` is the root of `φ_K'`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::env::EnvironmentSpec;
use crate::error::{Error, Result};

/// Root tolerance for `τ`.
pub const TAU_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    Supercritical,
    Critical,
    StronglySubcritical,
    IntermediateSubcritical,
    WeaklySubcritical,
}

impl RegimeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeLabel::Supercritical => "Supercritical",
            RegimeLabel::Critical => "Critical",
            RegimeLabel::StronglySubcritical => "StronglySubcritical",
            RegimeLabel::IntermediateSubcritical => "IntermediateSubcritical",
            RegimeLabel::WeaklySubcritical => "WeaklySubcritical",
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub label: RegimeLabel,
    pub phi_prime_0: f64,
    pub phi_prime_1: Option<f64>,
    pub tau: Option<f64>,
    /// `ρ ≤ 0`.
    pub exp_rate: f64,
    /// `κ ∈ {0, 1/2, 3/2}`.
    pub poly_exponent: f64,
}

impl RegimeReport {
    /// Predicted `log P(Z_t > 0)` up to an additive constant.
    pub fn log_asymptotic(&self, t: f64) -> f64 {
        self.exp_rate * t - self.poly_exponent * t.ln()
    }
}

/// `|φ_K'| ≤ derivative_tolerance(g)` counts as zero.
pub fn derivative_tolerance(g: f64) -> f64 {
    1e-9 * (1.0 + g.abs())
}

fn require_theta(spec: &EnvironmentSpec, threshold: f64, what: &str) -> Result<()> {
    if spec.theta_max() > threshold {
        Ok(())
    } else {
        Err(Error::AssumptionViolated(format!(
            "{what} asymptotics need θ_max > {threshold}, got θ_max = {}",
            spec.theta_max()
        )))
    }
}

/// Classifies the process with growth rate `g`, stable index `β` and
/// catastrophes from `spec` (whose own drift is replaced by `g`).
pub fn classify(spec: &EnvironmentSpec, g: f64, beta: f64) -> Result<RegimeReport> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "must lie in (0, 1]".into(),
        });
    }
    let spec = spec.with_drift(g)?;
    let tol = derivative_tolerance(g);
    let d0 = spec.phi_k_prime(0.0)?;
    if d0 > tol {
        return Ok(RegimeReport {
            label: RegimeLabel::Supercritical,
            phi_prime_0: d0,
            phi_prime_1: None,
            tau: None,
            exp_rate: 0.0,
            poly_exponent: 0.0,
        });
    }
    if d0.abs() <= tol {
        require_theta(&spec, beta, "critical")?;
        return Ok(RegimeReport {
            label: RegimeLabel::Critical,
            phi_prime_0: d0,
            phi_prime_1: None,
            tau: None,
            exp_rate: 0.0,
            poly_exponent: 0.5,
        });
    }
    require_theta(&spec, 1.0, "subcritical")?;
    let d1 = spec.phi_k_prime(1.0)?;
    let (label, tau, exp_rate, poly_exponent) = if d1 < -tol {
        (RegimeLabel::StronglySubcritical, None, spec.phi_k(1.0)?, 0.0)
    } else if d1.abs() <= tol {
        (RegimeLabel::IntermediateSubcritical, None, spec.phi_k(1.0)?, 0.5)
    } else {
        require_theta(&spec, beta + 1.0, "weakly subcritical")?;
        let tau = find_tau(&spec, g)?;
        let rate = spec.phi_k(tau)?;
        debug_assert!(rate < spec.phi_k(1.0)?);
        (RegimeLabel::WeaklySubcritical, Some(tau), rate, 1.5)
    };
    Ok(RegimeReport {
        label,
        phi_prime_0: d0,
        phi_prime_1: Some(d1),
        tau,
        exp_rate,
        poly_exponent,
    })
}

/// Root of `φ_K'` on `(0, 1)`, found by bisection.
///
/// The minimizing property `φ_K(τ) ≤ φ_K(s)` is cross-checked on a grid of
/// step `1e-3`.
pub fn find_tau(spec: &EnvironmentSpec, g: f64) -> Result<f64> {
    let spec = spec.with_drift(g)?;
    require_theta(&spec, 1.0, "the root τ")?;
    let f = |x: f64| spec.phi_k_prime(x);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::AssumptionViolated(format!(
            "τ needs φ_K'(0) < 0 < φ_K'(1), got {f_lo} and {f_hi}"
        )));
    }
    let mut mid = 0.5;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.abs() <= TAU_TOLERANCE || hi - lo <= 4.0 * f64::EPSILON {
            break;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let at_tau = spec.phi_k(mid)?;
    let slack = 1e-12 * (1.0 + at_tau.abs());
    for i in 1..1000 {
        let s = i as f64 * 1e-3;
        if spec.phi_k(s)? < at_tau - slack {
            return Err(Error::AssumptionViolated(format!(
                "φ_K({s}) < φ_K(τ = {mid}): φ_K is not convex on (0, 1)"
            )));
        }
    }
    Ok(mid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rho_hat: f64,
    pub kappa_hat: f64,
    pub r2: f64,
}

/// Minimum series length accepted by [`fit_rate`].
pub const MIN_FIT_POINTS: usize = 6;

/// Weighted least squares of `log(estimate)` on `(t, log t, 1)`.
///
/// Each point is `(t, estimate, stderr)`. The weight is `(estimate/stderr)²`
/// (inverse delta-method variance of the log) when every stderr is positive,
/// and uniform otherwise. Nonpositive estimates are dropped.
pub fn fit_rate(series: &[(f64, f64, f64)]) -> Result<RateFit> {
    if series.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least {MIN_FIT_POINTS} time points, got {}",
            series.len()
        )));
    }
    let kept: Vec<_> = series
        .iter()
        .copied()
        .filter(|&(t, e, _)| e > 0.0 && e.is_finite() && t > 0.0)
        .collect();
    if kept.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} positive estimates remain",
            kept.len()
        )));
    }
    let weighted = kept.iter().all(|&(_, _, se)| se > 0.0 && se.is_finite());
    let n = kept.len();
    let mut x = DMatrix::<f64>::zeros(n, 3);
    let mut y = DVector::<f64>::zeros(n);
    let mut w = Vec::with_capacity(n);
    for (i, &(t, e, se)) in kept.iter().enumerate() {
        let wi = if weighted { (e / se).powi(2) } else { 1.0 };
        let sw = wi.sqrt();
        x[(i, 0)] = sw * t;
        x[(i, 1)] = sw * t.ln();
        x[(i, 2)] = sw;
        y[i] = sw * e.ln();
        w.push(wi);
    }
    let beta = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::InsufficientData(format!("least squares failed: {e}")))?;
    let fitted = &x * &beta;
    let wsum: f64 = w.iter().sum();
    let mean: f64 = kept
        .iter()
        .zip(&w)
        .map(|(&(_, e, _), wi)| wi * e.ln())
        .sum::<f64>()
        / wsum;
    let ss_res: f64 = (&y - &fitted).iter().map(|r| r * r).sum();
    let ss_tot: f64 = kept
        .iter()
        .zip(&w)
        .map(|(&(_, e, _), wi)| wi * (e.ln() - mean).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        rho_hat: beta[0],
        kappa_hat: -beta[1],
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn half_atom() -> EnvironmentSpec {
        EnvironmentSpec::with_atoms(0.0, &[(0.5, 1.0)]).unwrap()
    }

    /// Independent bisection on `g - ln2 · 2^{-λ}`.
    fn tau_oracle(g: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if g - LN_2 * 0.5f64.powf(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn strongly_subcritical_example() {
        let r = classify(&half_atom(), 0.1, 1.0).unwrap();
        assert_eq!(r.label, RegimeLabel::StronglySubcritical);
        assert!((r.exp_rate + 0.4).abs() < 1e-12);
        assert_eq!(r.poly_exponent, 0.0);
    }

    #[test]
    fn intermediate_example() {
        let r = classify(&half_atom(), LN_2 / 2.0, 1.0).unwrap();
        assert_eq!(r.label, RegimeLabel::IntermediateSubcritical);
        assert!((r.exp_rate - (LN_2 / 2.0 - 0.5)).abs() < 1e-12);
        assert!((r.exp_rate + 0.153426).abs() < 1e-6);
        assert_eq!(r.poly_exponent, 0.5);
    }

    #[test]
    fn weakly_subcritical_example() {
        let r = classify(&half_atom(), 0.5, 1.0).unwrap();
        assert_eq!(r.label, RegimeLabel::WeaklySubcritical);
        let tau = r.tau.unwrap();
        assert!((tau - tau_oracle(0.5)).abs() < 1e-10);
        assert!((tau - 0.471233).abs() < 1e-6);
        let oracle_rate = 0.5 * tau_oracle(0.5) + 0.5f64.powf(tau_oracle(0.5)) - 1.0;
        assert!((r.exp_rate - oracle_rate).abs() < 1e-12);
        assert!((r.exp_rate + 0.043035).abs() < 1e-6);
        assert_eq!(r.poly_exponent, 1.5);
    }

    #[test]
    fn critical_and_supercritical() {
        let spec = half_atom();
        let g = -spec.phi_prime(0.0).unwrap();
        let r = classify(&spec, g, 1.0).unwrap();
        assert_eq!(r.label, RegimeLabel::Critical);
        assert_eq!((r.exp_rate, r.poly_exponent), (0.0, 0.5));
        let r = classify(&spec, 1.2, 1.0).unwrap();
        assert_eq!(r.label, RegimeLabel::Supercritical);
        assert_eq!((r.exp_rate, r.poly_exponent), (0.0, 0.0));
    }

    #[test]
    fn symmetric_atoms_give_half() {
        // φ'(λ) = ln2 (2^λ - 2^{1-λ}), so φ'(0) = -φ'(1) and the root is 1/2
        let spec = EnvironmentSpec::with_atoms(0.0, &[(0.5, 2.0), (2.0, 1.0)]).unwrap();
        let tau = find_tau(&spec, 0.0).unwrap();
        assert!((tau - 0.5).abs() < 1e-12);
        assert!(find_tau(&spec, 1.0).is_err());
    }

    #[test]
    fn missing_exponential_moments_are_reported() {
        use crate::env::{Component, MultiplierLaw};
        let spec = EnvironmentSpec::new(
            0.0,
            vec![],
            vec![Component {
                rate: 1.0,
                law: MultiplierLaw::Pareto {
                    alpha: 1.5,
                    scale: 0.2,
                },
            }],
        )
        .unwrap();
        let d0 = spec.phi_prime(0.0).unwrap();
        // slightly subcritical with θ_max = 1.5 < β + 1 = 2
        let g = -d0 - 0.01;
        match classify(&spec, g, 1.0) {
            Ok(r) => assert_ne!(r.label, RegimeLabel::WeaklySubcritical),
            Err(e) => assert!(matches!(e, Error::AssumptionViolated(_)), "{e}"),
        }
    }

    #[test]
    fn fit_exact_exponential() {
        let s: Vec<_> = (1..=10)
            .map(|i| {
                let t = i as f64 * 5.0;
                (t, 3.0 * (-0.4 * t).exp(), 0.0)
            })
            .collect();
        let f = fit_rate(&s).unwrap();
        assert!((f.rho_hat + 0.4).abs() < 1e-10);
        assert!(f.kappa_hat.abs() < 1e-10);
    }

    #[test]
    fn fit_exact_power() {
        let s: Vec<_> = (1..=10)
            .map(|i| {
                let t = i as f64 * 5.0;
                (t, t.powf(-0.5), 0.0)
            })
            .collect();
        let f = fit_rate(&s).unwrap();
        assert!((f.kappa_hat - 0.5).abs() < 1e-10);
        assert!(f.rho_hat.abs() < 1e-10);
    }

    #[test]
    fn fit_noisy_weak_series() {
        use rand::Rng;
        let mut rng = crate::rng::stream(99, 0);
        let s: Vec<_> = (0..13)
            .map(|i| {
                let t = 40.0 + 10.0 * i as f64;
                let a = 5.0 * t.powf(-1.5) * (-0.043 * t).exp();
                let noise = 1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt();
                (t, a * noise, 0.01 * a)
            })
            .collect();
        let f = fit_rate(&s).unwrap();
        assert!(((f.rho_hat + 0.043) / 0.043).abs() < 0.1, "{f:?}");
        assert!((f.kappa_hat - 1.5).abs() < 0.3, "{f:?}");
    }

    #[test]
    fn fit_rejects_short_series() {
        let s = vec![(1.0, 1.0, 0.1); 5];
        assert!(matches!(fit_rate(&s), Err(Error::InsufficientData(_))));
        let mut s = vec![(1.0, -1.0, 0.1); 6];
        s[0] = (1.0, 1.0, 0.1);
        assert!(matches!(fit_rate(&s), Err(Error::InsufficientData(_))));
    }

    proptest! {
        #[test]
        fn time_scaling_invariance(g in -1.0f64..1.5, c in 0.1f64..10.0) {
            let spec = half_atom();
            let a = classify(&spec, g, 1.0).unwrap();
            let scaled = spec.time_scaled(c).unwrap();
            let b = classify(&scaled, g * c, 1.0).unwrap();
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(a.poly_exponent, b.poly_exponent);
            prop_assert!((b.exp_rate - c * a.exp_rate).abs() < 1e-9 * (1.0 + c));
            if let (Some(x), Some(y)) = (a.tau, b.tau) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn weak_rate_below_phi_one(g in 0.35f64..0.69) {
            let spec = half_atom();
            let r = classify(&spec, g, 1.0).unwrap();
            prop_assert_eq!(r.label, RegimeLabel::WeaklySubcritical);
            let phi1 = spec.with_drift(g).unwrap().phi_k(1.0).unwrap();
            prop_assert!(r.exp_rate < phi1);
            let tau = r.tau.unwrap();
            let tspec = spec.with_drift(g).unwrap();
            for i in 1..100 {
                let s = i as f64 / 100.0;
                prop_assert!(r.exp_rate <= tspec.phi_k(s).unwrap() + 1e-12);
            }
            prop_assert!(tspec.phi_k_prime(tau).unwrap().abs() <= 1e-11);
        }
    }
}
