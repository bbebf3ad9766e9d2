//! Normalized laws for the bounded-density part of a catastrophe measure.
//!
//! Each law is a probability distribution of the multiplier `M` on `(0, ∞)`.
//! The environment scales it by a total rate. Every family is closed under
//! exponential tilting `P(M ∈ dm) ↦ m^λ P(M ∈ dm) / E[M^λ]`, which is what the
//! Esscher transform needs.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MultiplierLaw {
    /// Density proportional to `m^power` on `(lo, hi)`; `power = 0` is uniform.
    PowerUniform { lo: f64, hi: f64, power: f64 },
    /// Beta(a, b) on `(0, 1)`.
    Beta { a: f64, b: f64 },
    /// Pareto with tail index `alpha` on `(scale, ∞)`.
    Pareto { alpha: f64, scale: f64 },
    /// Density proportional to `m^tilt |m - 1|^(-exponent)` on
    /// `(lo, 1 - eps_below) ∪ (1 + eps_above, hi)`. `hi` may be infinite.
    PowerNearOne {
        lo: f64,
        hi: f64,
        exponent: f64,
        eps_below: f64,
        eps_above: f64,
        #[serde(default)]
        tilt: f64,
    },
}

fn invalid(name: &'static str, value: f64, reason: &str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason: reason.to_string(),
    }
}

/// `∫_lo^hi m^k (log m)^order dm` for order 0, 1, 2.
fn power_log_integral(k: f64, lo: f64, hi: f64, order: u32) -> f64 {
    let j = k + 1.0;
    let prim = |m: f64| -> f64 {
        if m == 0.0 {
            // only reached for j > 0, where every primitive vanishes at 0
            return 0.0;
        }
        let l = m.ln();
        if j.abs() < 1e-10 {
            match order {
                0 => l,
                1 => 0.5 * l * l,
                _ => l * l * l / 3.0,
            }
        } else {
            let p = (j * l).exp();
            match order {
                0 => p / j,
                1 => p * (l / j - 1.0 / (j * j)),
                _ => p * (l * l / j - 2.0 * l / (j * j) + 2.0 / (j * j * j)),
            }
        }
    };
    prim(hi) - prim(lo)
}

/// Antiderivative of `x^(-p)`.
fn g_prim(p: f64, x: f64) -> f64 {
    if (p - 1.0).abs() < 1e-12 {
        x.ln()
    } else {
        x.powf(1.0 - p) / (1.0 - p)
    }
}

fn g_prim_inv(p: f64, y: f64) -> f64 {
    if (p - 1.0).abs() < 1e-12 {
        y.exp()
    } else {
        (y * (1.0 - p)).powf(1.0 / (1.0 - p))
    }
}

/// `∫_lo^hi f` with a change of variables when `hi = ∞`.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    if hi.is_infinite() {
        // m = lo + x/(1-x), dm = dx/(1-x)^2
        let g = |x: f64| {
            let one_minus = 1.0 - x;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let v = f(lo + x / one_minus) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        quadrature::double_exponential::integrate(g, 0.0, 1.0, QUAD_TOL).integral
    } else {
        quadrature::double_exponential::integrate(f, lo, hi, QUAD_TOL).integral
    }
}

impl MultiplierLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MultiplierLaw::PowerUniform { lo, hi, power } => {
                if !(lo > 0.0 && lo.is_finite()) {
                    return Err(invalid("lo", lo, "must be finite and > 0"));
                }
                if !(hi > lo && hi.is_finite()) {
                    return Err(invalid("hi", hi, "must be finite and > lo"));
                }
                if !power.is_finite() {
                    return Err(invalid("power", power, "must be finite"));
                }
            }
            MultiplierLaw::Beta { a, b } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(invalid("a", a, "must be finite and > 0"));
                }
                if !(b > 0.0 && b.is_finite()) {
                    return Err(invalid("b", b, "must be finite and > 0"));
                }
            }
            MultiplierLaw::Pareto { alpha, scale } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(invalid("alpha", alpha, "must be finite and > 0"));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(invalid("scale", scale, "must be finite and > 0"));
                }
            }
            MultiplierLaw::PowerNearOne {
                lo,
                hi,
                exponent,
                eps_below,
                eps_above,
                tilt,
            } => {
                if !(0.0..1.0).contains(&lo) {
                    return Err(invalid("lo", lo, "must lie in [0, 1)"));
                }
                if !(hi > 1.0) {
                    return Err(invalid("hi", hi, "must exceed 1"));
                }
                if !(exponent.is_finite() && exponent >= 0.0) {
                    return Err(invalid("exponent", exponent, "must be finite and >= 0"));
                }
                if !(eps_below > 0.0 && eps_below < 1.0) {
                    return Err(invalid("eps_below", eps_below, "must lie in (0, 1)"));
                }
                if !(eps_above > 0.0 && eps_above.is_finite()) {
                    return Err(invalid("eps_above", eps_above, "must be finite and > 0"));
                }
                if !(tilt.is_finite() && tilt >= 0.0) {
                    return Err(invalid("tilt", tilt, "must be finite and >= 0"));
                }
                if hi.is_infinite() && exponent - tilt <= 1.0 {
                    return Err(Error::InfiniteMass(format!(
                        "density |m-1|^-{exponent} m^{tilt} is not integrable at infinity"
                    )));
                }
                let (below, above) = self.near_one_piece_masses();
                if below + above <= 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "eps",
                        value: eps_below.max(eps_above),
                        reason: "truncation removes the whole support".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Supremum of `λ` with `E[M^λ] < ∞`.
    pub fn theta_max(&self) -> f64 {
        match *self {
            MultiplierLaw::PowerUniform { .. } | MultiplierLaw::Beta { .. } => f64::INFINITY,
            MultiplierLaw::Pareto { alpha, .. } => alpha,
            MultiplierLaw::PowerNearOne {
                hi, exponent, tilt, ..
            } => {
                if hi.is_finite() {
                    f64::INFINITY
                } else {
                    exponent - 1.0 - tilt
                }
            }
        }
    }

    /// Untilted masses `∫ |m-1|^-p dm` of the two pieces of a `PowerNearOne` law.
    pub(crate) fn near_one_piece_masses(&self) -> (f64, f64) {
        match *self {
            MultiplierLaw::PowerNearOne {
                lo,
                hi,
                exponent,
                eps_below,
                eps_above,
                ..
            } => {
                let below = if 1.0 - lo > eps_below {
                    g_prim(exponent, 1.0 - lo) - g_prim(exponent, eps_below)
                } else {
                    0.0
                };
                let above = if hi - 1.0 > eps_above {
                    let top = if hi.is_infinite() {
                        0.0
                    } else {
                        g_prim(exponent, hi - 1.0)
                    };
                    top - g_prim(exponent, eps_above)
                } else {
                    0.0
                };
                (below, above)
            }
            _ => (0.0, 0.0),
        }
    }

    /// Unnormalized `∫ m^s (log m)^order w(m) dm` for the `PowerNearOne` weight.
    fn near_one_integral(&self, s: f64, order: i32) -> f64 {
        let MultiplierLaw::PowerNearOne {
            lo,
            hi,
            exponent,
            eps_below,
            eps_above,
            tilt,
        } = *self
        else {
            unreachable!()
        };
        let f = |m: f64| {
            if m <= 0.0 {
                return 0.0;
            }
            let l = m.ln();
            (l * (s + tilt)).exp() * (m - 1.0).abs().powf(-exponent) * l.powi(order)
        };
        integrate(f, lo, 1.0 - eps_below) + integrate(f, 1.0 + eps_above, hi)
    }

    fn check_domain(&self, lambda: f64) -> Result<()> {
        let theta = self.theta_max();
        if lambda.is_nan() || lambda >= theta {
            return Err(Error::OutsideExponentDomain {
                lambda,
                theta_max: theta,
            });
        }
        Ok(())
    }

    /// `E[M^λ]`.
    pub fn moment(&self, lambda: f64) -> Result<f64> {
        self.check_domain(lambda)?;
        Ok(match *self {
            MultiplierLaw::PowerUniform { lo, hi, power } => {
                power_log_integral(power + lambda, lo, hi, 0) / power_log_integral(power, lo, hi, 0)
            }
            MultiplierLaw::Beta { a, b } => {
                (ln_gamma(a + lambda) - ln_gamma(a) + ln_gamma(a + b) - ln_gamma(a + b + lambda))
                    .exp()
            }
            MultiplierLaw::Pareto { alpha, scale } => {
                alpha * scale.powf(lambda) / (alpha - lambda)
            }
            MultiplierLaw::PowerNearOne { .. } => {
                self.near_one_integral(lambda, 0) / self.near_one_integral(0.0, 0)
            }
        })
    }

    /// `E[M^λ log M]`, the derivative of [`moment`](Self::moment) in `λ`.
    pub fn moment_log(&self, lambda: f64) -> Result<f64> {
        self.check_domain(lambda)?;
        Ok(match *self {
            MultiplierLaw::PowerUniform { lo, hi, power } => {
                power_log_integral(power + lambda, lo, hi, 1) / power_log_integral(power, lo, hi, 0)
            }
            MultiplierLaw::Beta { a, b } => {
                self.moment(lambda)? * (digamma(a + lambda) - digamma(a + b + lambda))
            }
            MultiplierLaw::Pareto { alpha, scale } => {
                let d = alpha - lambda;
                alpha * scale.powf(lambda) * (scale.ln() / d + 1.0 / (d * d))
            }
            MultiplierLaw::PowerNearOne { .. } => {
                self.near_one_integral(lambda, 1) / self.near_one_integral(0.0, 0)
            }
        })
    }

    /// `E[(log M)^2]`.
    pub fn mean_log_squared(&self) -> f64 {
        match *self {
            MultiplierLaw::PowerUniform { lo, hi, power } => {
                power_log_integral(power, lo, hi, 2) / power_log_integral(power, lo, hi, 0)
            }
            MultiplierLaw::Beta { a, b } => {
                let ln_norm = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
                let f = |m: f64| {
                    if m <= 0.0 || m >= 1.0 {
                        return 0.0;
                    }
                    let l = m.ln();
                    l * l * ((a - 1.0) * l + (b - 1.0) * (-m).ln_1p() - ln_norm).exp()
                };
                integrate(f, 0.0, 1.0)
            }
            MultiplierLaw::Pareto { alpha, scale } => {
                let ls = scale.ln();
                ls * ls + 2.0 * ls / alpha + 2.0 / (alpha * alpha)
            }
            MultiplierLaw::PowerNearOne { .. } => {
                self.near_one_integral(0.0, 2) / self.near_one_integral(0.0, 0)
            }
        }
    }

    /// Law of `M` under the tilt `m^λ`.
    pub fn tilted(&self, lambda: f64) -> Result<MultiplierLaw> {
        self.check_domain(lambda)?;
        if lambda < 0.0 {
            return Err(invalid("lambda", lambda, "tilt must be >= 0"));
        }
        Ok(match self.clone() {
            MultiplierLaw::PowerUniform { lo, hi, power } => MultiplierLaw::PowerUniform {
                lo,
                hi,
                power: power + lambda,
            },
            MultiplierLaw::Beta { a, b } => MultiplierLaw::Beta { a: a + lambda, b },
            MultiplierLaw::Pareto { alpha, scale } => MultiplierLaw::Pareto {
                alpha: alpha - lambda,
                scale,
            },
            MultiplierLaw::PowerNearOne {
                lo,
                hi,
                exponent,
                eps_below,
                eps_above,
                tilt,
            } => {
                if hi.is_infinite() && lambda > 0.0 {
                    return Err(Error::Unsupported(
                        "tilting an unbounded near-one density (no rejection envelope)".into(),
                    ));
                }
                MultiplierLaw::PowerNearOne {
                    lo,
                    hi,
                    exponent,
                    eps_below,
                    eps_above,
                    tilt: tilt + lambda,
                }
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MultiplierLaw::PowerUniform { lo, hi, power } => {
                let u: f64 = rng.random();
                let j = power + 1.0;
                if j.abs() < 1e-10 {
                    lo * (hi / lo).powf(u)
                } else {
                    let (a, b) = (lo.powf(j), hi.powf(j));
                    (a + u * (b - a)).powf(1.0 / j)
                }
            }
            MultiplierLaw::Beta { a, b } => {
                let d = BetaDist::new(a, b).expect("validated beta parameters");
                // the sampler may return exactly 0 or 1 in extreme parameter ranges
                d.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
            }
            MultiplierLaw::Pareto { alpha, scale } => {
                let u: f64 = rng.random();
                scale * (1.0 - u).powf(-1.0 / alpha)
            }
            MultiplierLaw::PowerNearOne {
                exponent,
                eps_below,
                eps_above,
                tilt,
                lo,
                hi,
            } => {
                let (below, above) = self.near_one_piece_masses();
                let envelope = if tilt > 0.0 { hi.powf(tilt) } else { 1.0 };
                loop {
                    let pick: f64 = rng.random::<f64>() * (below + above);
                    let u: f64 = rng.random();
                    let m = if pick < below {
                        let a = g_prim(exponent, eps_below);
                        let b = g_prim(exponent, 1.0 - lo);
                        1.0 - g_prim_inv(exponent, a + u * (b - a))
                    } else {
                        let a = g_prim(exponent, eps_above);
                        let b = if hi.is_infinite() {
                            0.0
                        } else {
                            g_prim(exponent, hi - 1.0)
                        };
                        1.0 + g_prim_inv(exponent, a + u * (b - a))
                    };
                    if tilt == 0.0 || rng.random::<f64>() * envelope <= m.powf(tilt) {
                        return m;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn laws() -> Vec<MultiplierLaw> {
        vec![
            MultiplierLaw::PowerUniform {
                lo: 0.2,
                hi: 0.8,
                power: 0.0,
            },
            MultiplierLaw::PowerUniform {
                lo: 0.5,
                hi: 3.0,
                power: -1.0,
            },
            MultiplierLaw::Beta { a: 2.0, b: 3.0 },
            MultiplierLaw::Pareto {
                alpha: 4.0,
                scale: 1.5,
            },
            MultiplierLaw::PowerNearOne {
                lo: 0.0,
                hi: 2.0,
                exponent: 0.5,
                eps_below: 0.1,
                eps_above: 0.1,
                tilt: 0.0,
            },
            MultiplierLaw::PowerNearOne {
                lo: 0.0,
                hi: 2.0,
                exponent: 1.5,
                eps_below: 0.05,
                eps_above: 0.2,
                tilt: 0.7,
            },
        ]
    }

    fn quad_moment(law: &MultiplierLaw, s: f64, order: i32) -> f64 {
        // density-by-density quadrature, independent of the closed forms above
        let (lo, hi, dens): (f64, f64, Box<dyn Fn(f64) -> f64>) = match *law {
            MultiplierLaw::PowerUniform { lo, hi, power } => (lo, hi, Box::new(move |m| m.powf(power))),
            MultiplierLaw::Beta { a, b } => {
                (0.0, 1.0, Box::new(move |m| m.powf(a - 1.0) * (1.0 - m).powf(b - 1.0)))
            }
            MultiplierLaw::Pareto { alpha, scale } => {
                (scale, f64::INFINITY, Box::new(move |m| m.powf(-alpha - 1.0)))
            }
            _ => unreachable!(),
        };
        let num = integrate(|m| dens(m) * m.powf(s) * m.ln().powi(order), lo, hi);
        let den = integrate(dens, lo, hi);
        num / den
    }

    #[test]
    fn closed_form_moments_match_quadrature() {
        for law in laws().iter().take(4) {
            for &s in &[0.0, 0.5, 1.0, 1.7] {
                let m = law.moment(s).unwrap();
                let q = quad_moment(law, s, 0);
                assert!((m - q).abs() < 1e-8 * q.abs().max(1.0), "{law:?} s={s}: {m} vs {q}");
                let ml = law.moment_log(s).unwrap();
                let ql = quad_moment(law, s, 1);
                assert!((ml - ql).abs() < 1e-7, "{law:?} s={s}: {ml} vs {ql}");
            }
            let l2 = law.mean_log_squared();
            let q2 = quad_moment(law, 0.0, 2);
            assert!((l2 - q2).abs() < 1e-7, "{law:?}: {l2} vs {q2}");
        }
    }

    #[test]
    fn moment_at_zero_is_one() {
        for law in laws() {
            law.validate().unwrap();
            assert!((law.moment(0.0).unwrap() - 1.0).abs() < 1e-12, "{law:?}");
        }
    }

    #[test]
    fn moment_log_is_derivative_of_moment() {
        for law in laws() {
            for &s in &[0.3, 1.0] {
                let h = 1e-5;
                let fd = (law.moment(s + h).unwrap() - law.moment(s - h).unwrap()) / (2.0 * h);
                let d = law.moment_log(s).unwrap();
                assert!((fd - d).abs() < 1e-6 * d.abs().max(1.0), "{law:?}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn pareto_domain_is_enforced() {
        let law = MultiplierLaw::Pareto {
            alpha: 2.0,
            scale: 1.1,
        };
        assert_eq!(law.theta_max(), 2.0);
        assert!(matches!(
            law.moment(2.0),
            Err(Error::OutsideExponentDomain { .. })
        ));
        assert!(law.tilted(2.5).is_err());
    }

    #[test]
    fn samples_reproduce_moments() {
        for law in laws() {
            let mut rng = stream(11, 0);
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let exact = law.moment(1.0).unwrap();
            assert!((mean - exact).abs() < 4.0 * se, "{law:?}: {mean} vs {exact} (se {se})");
        }
    }

    #[test]
    fn tilted_law_moments_are_ratios() {
        for law in laws() {
            let lam = 0.6;
            let tilted = law.tilted(lam).unwrap();
            let expect = law.moment(lam + 1.0).unwrap() / law.moment(lam).unwrap();
            let got = tilted.moment(1.0).unwrap();
            assert!((expect - got).abs() < 1e-8 * expect, "{law:?}: {expect} vs {got}");
        }
    }

    #[test]
    fn unbounded_near_one_density_needs_integrable_tail() {
        let law = MultiplierLaw::PowerNearOne {
            lo: 0.0,
            hi: f64::INFINITY,
            exponent: 0.9,
            eps_below: 0.1,
            eps_above: 0.1,
            tilt: 0.0,
        };
        assert!(matches!(law.validate(), Err(Error::InfiniteMass(_))));
        let ok = MultiplierLaw::PowerNearOne {
            lo: 0.0,
            hi: f64::INFINITY,
            exponent: 3.0,
            eps_below: 0.1,
            eps_above: 0.1,
            tilt: 0.0,
        };
        ok.validate().unwrap();
        assert!((ok.theta_max() - 2.0).abs() < 1e-15);
    }
}
