use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::law::MultiplierLaw;
use super::path::JumpPath;
use crate::error::{require_finite, require_positive, Error, Result};

/// A point mass of the catastrophe measure: jumps `Y ↦ m·Y` at rate `rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "m")]
    pub multiplier: f64,
    pub rate: f64,
}

impl Atom {
    pub fn new(multiplier: f64, rate: f64) -> Self {
        Atom { multiplier, rate }
    }
}

/// A bounded-density piece of the catastrophe measure: `rate · P(M ∈ dm)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub rate: f64,
    #[serde(flatten)]
    pub law: MultiplierLaw,
}

/// Bounded-variation Lévy environment `K_t = g t + Δ_t` where `Δ` is a
/// compound Poisson process of log-multipliers with finite intensity `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    drift: f64,
    atoms: Vec<Atom>,
    components: Vec<Component>,
    total_rate: f64,
    theta_max: f64,
}

impl EnvironmentSpec {
    pub fn new(drift: f64, atoms: Vec<Atom>, components: Vec<Component>) -> Result<Self> {
        require_finite("drift", drift)?;
        for atom in &atoms {
            require_positive("m", atom.multiplier)?;
            require_positive("rate", atom.rate)?;
            if atom.multiplier == 1.0 {
                return Err(Error::InvalidParameter {
                    name: "m",
                    value: 1.0,
                    reason: "a multiplier of 1 is not a jump".into(),
                });
            }
        }
        for c in &components {
            require_positive("rate", c.rate)?;
            c.law.validate()?;
        }
        let total_rate =
            atoms.iter().map(|a| a.rate).sum::<f64>() + components.iter().map(|c| c.rate).sum::<f64>();
        if !total_rate.is_finite() {
            return Err(Error::InfiniteMass("total jump rate".into()));
        }
        let theta_max = components
            .iter()
            .map(|c| c.law.theta_max())
            .fold(f64::INFINITY, f64::min);
        Ok(EnvironmentSpec {
            drift,
            atoms,
            components,
            total_rate,
            theta_max,
        })
    }

    /// Environment made of atoms only.
    pub fn with_atoms(drift: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            drift,
            atoms.iter().map(|&(m, r)| Atom::new(m, r)).collect(),
            Vec::new(),
        )
    }

    /// Deterministic environment `K_t = g t`.
    pub fn deterministic(drift: f64) -> Result<Self> {
        Self::new(drift, Vec::new(), Vec::new())
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// `Λ = ν(0, ∞)`.
    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    /// `sup{λ ≥ 0 : φ(λ) < ∞}`; `+∞` when every piece has bounded support.
    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// Same catastrophes, different drift.
    pub fn with_drift(&self, drift: f64) -> Result<Self> {
        require_finite("drift", drift)?;
        Ok(EnvironmentSpec {
            drift,
            ..self.clone()
        })
    }

    /// Multiply every rate and the drift by `c > 0` (a change of time unit).
    pub fn time_scaled(&self, c: f64) -> Result<Self> {
        require_positive("c", c)?;
        Self::new(
            self.drift * c,
            self.atoms
                .iter()
                .map(|a| Atom::new(a.multiplier, a.rate * c))
                .collect(),
            self.components
                .iter()
                .map(|comp| Component {
                    rate: comp.rate * c,
                    law: comp.law.clone(),
                })
                .collect(),
        )
    }

    fn check_domain(&self, lambda: f64) -> Result<()> {
        if lambda.is_nan() || lambda < 0.0 || lambda >= self.theta_max {
            return Err(Error::OutsideExponentDomain {
                lambda,
                theta_max: self.theta_max,
            });
        }
        Ok(())
    }

    /// Laplace exponent of the jump part, `φ(λ) = log E[e^{λ Δ_1}] = ∫ (m^λ - 1) ν(dm)`.
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        self.check_domain(lambda)?;
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.rate * (lambda * a.multiplier.ln()).exp_m1();
        }
        for c in &self.components {
            acc += c.rate * (c.law.moment(lambda)? - 1.0);
        }
        Ok(acc)
    }

    /// `φ'(λ) = ∫ m^λ log m ν(dm)`.
    pub fn phi_prime(&self, lambda: f64) -> Result<f64> {
        self.check_domain(lambda)?;
        let mut acc = 0.0;
        for a in &self.atoms {
            let l = a.multiplier.ln();
            acc += a.rate * (lambda * l).exp() * l;
        }
        for c in &self.components {
            acc += c.rate * c.law.moment_log(lambda)?;
        }
        Ok(acc)
    }

    /// `φ_K(λ) = g λ + φ(λ)`.
    pub fn phi_k(&self, lambda: f64) -> Result<f64> {
        Ok(self.drift * lambda + self.phi(lambda)?)
    }

    pub fn phi_k_prime(&self, lambda: f64) -> Result<f64> {
        Ok(self.drift + self.phi_prime(lambda)?)
    }

    /// `∫ (log m)^2 ν(dm)`.
    pub fn log_jump_second_moment(&self) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .map(|a| a.rate * a.multiplier.ln().powi(2))
            .sum();
        let comps: f64 = self
            .components
            .iter()
            .map(|c| c.rate * c.law.mean_log_squared())
            .sum();
        atoms + comps
    }

    /// Esscher-tilted environment: the law of `K` under
    /// `dP^{(λ)}/dP = exp(λ K_t - t φ_K(λ))`.
    pub fn esscher(&self, lambda: f64) -> Result<Self> {
        self.check_domain(lambda)?;
        if lambda == 0.0 {
            return Ok(self.clone());
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.multiplier, a.rate * a.multiplier.powf(lambda)))
            .collect();
        let mut components = Vec::with_capacity(self.components.len());
        for c in &self.components {
            components.push(Component {
                rate: c.rate * c.law.moment(lambda)?,
                law: c.law.tilted(lambda)?,
            });
        }
        Self::new(self.drift, atoms, components)
    }

    /// One multiplier drawn from the normalized measure `ν / Λ`.
    pub fn sample_multiplier<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut pick = rng.random::<f64>() * self.total_rate;
        for a in &self.atoms {
            if pick < a.rate {
                return a.multiplier;
            }
            pick -= a.rate;
        }
        for c in &self.components {
            if pick < c.rate {
                return c.law.sample(rng);
            }
            pick -= c.rate;
        }
        // rounding left `pick` just past the last bucket
        match (self.components.last(), self.atoms.last()) {
            (Some(c), _) => c.law.sample(rng),
            (None, Some(a)) => a.multiplier,
            (None, None) => unreachable!("sampling from an empty catastrophe measure"),
        }
    }

    /// Jump count `~ Poisson(Λ T)`, jump times uniform order statistics on
    /// `(0, T]`, multipliers i.i.d. from `ν / Λ`.
    pub fn sample_path<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<JumpPath> {
        require_positive("horizon", horizon)?;
        let mean = self.total_rate * horizon;
        let count = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::InvalidParameter {
                    name: "rate*horizon",
                    value: mean,
                    reason: e.to_string(),
                })?
                .sample(rng) as usize
        } else {
            0
        };
        let mut times: Vec<f64> = (0..count)
            .map(|_| (1.0 - rng.random::<f64>()) * horizon)
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite jump times"));
        let jumps = times
            .into_iter()
            .map(|t| (t, self.sample_multiplier(rng).ln()))
            .collect();
        JumpPath::new(horizon, self.drift, jumps)
    }
}

/// View of `φ_K` as a function, with a convexity check on sampled grids.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceExponent<'a> {
    spec: &'a EnvironmentSpec,
}

impl<'a> LaplaceExponent<'a> {
    pub fn new(spec: &'a EnvironmentSpec) -> Self {
        LaplaceExponent { spec }
    }

    pub fn value(&self, lambda: f64) -> Result<f64> {
        self.spec.phi_k(lambda)
    }

    pub fn derivative(&self, lambda: f64) -> Result<f64> {
        self.spec.phi_k_prime(lambda)
    }

    /// Midpoint convexity on `(a, c)` within an absolute slack.
    pub fn is_midpoint_convex(&self, a: f64, c: f64, slack: f64) -> Result<bool> {
        let mid = self.value(0.5 * (a + c))?;
        Ok(2.0 * mid <= self.value(a)? + self.value(c)? + slack)
    }
}
