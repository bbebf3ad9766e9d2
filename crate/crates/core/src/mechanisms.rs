//! Branching mechanisms `ψ(λ) = -gλ + σ²λ² + ∫(e^{-λz} - 1 + λz) μ(dz)` and
//! their centered parts `ψ₀(λ) = ψ(λ) - λψ'(0)`.

use serde::{Deserialize, Serialize};

use crate::env::integrate;
use crate::error::{require_finite, require_positive, Error, Result};

/// `e^{-x} - 1 + x`, accurate for small `x`.
pub(crate) fn compensated_exp(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 24.0)
    } else {
        (-x).exp_m1() + x
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "branching mechanisms are evaluated on [0, ∞)".into(),
        });
    }
    Ok(())
}

/// `ψ(λ) = -gλ + c₊ λ^{1+β}`; `β = 1` is the Feller diffusion with `σ² = c₊`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableMechanism {
    pub g: f64,
    pub c_plus: f64,
    pub beta: f64,
}

impl StableMechanism {
    pub fn new(g: f64, c_plus: f64, beta: f64) -> Result<Self> {
        let m = StableMechanism { g, c_plus, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn feller(g: f64, sigma2: f64) -> Result<Self> {
        Self::new(g, sigma2, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("g", self.g)?;
        require_positive("c_plus", self.c_plus)?;
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: self.beta,
                reason: "must lie in (0, 1]".into(),
            });
        }
        Ok(())
    }

    pub fn psi(&self, lambda: f64) -> Result<f64> {
        Ok(-self.g * lambda + self.psi0(lambda)?)
    }

    pub fn psi0(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        Ok(self.c_plus * lambda.powf(1.0 + self.beta))
    }

    pub fn is_feller(&self) -> bool {
        self.beta == 1.0
    }
}

/// Bounded density part of the reproduction measure `μ`, scaled by `mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReproductionDensity {
    /// `mass · rate · e^{-rate z}` on `(0, ∞)`.
    Exponential { mass: f64, rate: f64 },
    /// `mass / (hi - lo)` on `(lo, hi)`.
    Uniform { mass: f64, lo: f64, hi: f64 },
}

impl ReproductionDensity {
    fn validate(&self) -> Result<()> {
        match *self {
            ReproductionDensity::Exponential { mass, rate } => {
                require_positive("mass", mass)?;
                require_positive("rate", rate)?;
            }
            ReproductionDensity::Uniform { mass, lo, hi } => {
                require_positive("mass", mass)?;
                if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "hi",
                        value: hi,
                        reason: "uniform reproduction density needs 0 <= lo < hi < ∞".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// `∫ (e^{-λz} - 1 + λz) μ(dz)` by adaptive quadrature.
    ///
    /// The integrand is divided by its value at a typical jump size so that
    /// the absolute quadrature tolerance acts as a relative one.
    fn compensated_integral(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        match *self {
            ReproductionDensity::Exponential { mass, rate } => {
                let scale = compensated_exp(lambda / rate);
                mass * scale
                    * integrate(
                        |z| compensated_exp(lambda * z) / scale * rate * (-rate * z).exp(),
                        0.0,
                        f64::INFINITY,
                    )
            }
            ReproductionDensity::Uniform { mass, lo, hi } => {
                let scale = compensated_exp(lambda * hi);
                mass / (hi - lo)
                    * scale
                    * integrate(|z| compensated_exp(lambda * z) / scale, lo, hi)
            }
        }
    }

    fn second_moment(&self) -> f64 {
        match *self {
            ReproductionDensity::Exponential { mass, rate } => mass * 2.0 / (rate * rate),
            ReproductionDensity::Uniform { mass, lo, hi } => {
                mass * (hi.powi(3) - lo.powi(3)) / (3.0 * (hi - lo))
            }
        }
    }
}

/// Reproduction atom: offspring mass `z` at rate `rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproductionAtom {
    pub z: f64,
    pub rate: f64,
}

/// Mechanism with Brownian part `σ²` and a finite-second-moment jump measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralMechanism {
    pub g: f64,
    pub sigma2: f64,
    #[serde(default)]
    pub mu_atoms: Vec<ReproductionAtom>,
    #[serde(default)]
    pub mu_density: Option<ReproductionDensity>,
}

impl GeneralMechanism {
    pub fn new(
        g: f64,
        sigma2: f64,
        mu_atoms: Vec<ReproductionAtom>,
        mu_density: Option<ReproductionDensity>,
    ) -> Result<Self> {
        let m = GeneralMechanism {
            g,
            sigma2,
            mu_atoms,
            mu_density,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("g", self.g)?;
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma2",
                value: self.sigma2,
                reason: "must be finite and >= 0".into(),
            });
        }
        for a in &self.mu_atoms {
            require_positive("z", a.z)?;
            require_positive("rate", a.rate)?;
        }
        if let Some(d) = &self.mu_density {
            d.validate()?;
        }
        Ok(())
    }

    pub fn psi(&self, lambda: f64) -> Result<f64> {
        Ok(-self.g * lambda + self.psi0(lambda)?)
    }

    pub fn psi0(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let atoms: f64 = self
            .mu_atoms
            .iter()
            .map(|a| a.rate * compensated_exp(lambda * a.z))
            .sum();
        let density = self
            .mu_density
            .map_or(0.0, |d| d.compensated_integral(lambda));
        Ok(self.sigma2 * lambda * lambda + atoms + density)
    }

    /// `c = ∫ z² μ(dz)`.
    pub fn jump_second_moment(&self) -> f64 {
        self.mu_atoms.iter().map(|a| a.rate * a.z * a.z).sum::<f64>()
            + self.mu_density.map_or(0.0, |d| d.second_moment())
    }

    /// Quadratic mechanisms `ψ₋ ≤ ψ ≤ ψ₊` with diffusion `σ²` and `σ² + c/2`.
    pub fn sandwich(&self) -> Result<(StableMechanism, StableMechanism)> {
        if self.sigma2 <= 0.0 {
            return Err(Error::Unsupported(
                "quadratic sandwich needs a positive Brownian coefficient".into(),
            ));
        }
        let c = self.jump_second_moment();
        if !c.is_finite() {
            return Err(Error::Unsupported(
                "quadratic sandwich needs a finite second moment of μ".into(),
            ));
        }
        Ok((
            StableMechanism::feller(self.g, self.sigma2)?,
            StableMechanism::feller(self.g, self.sigma2 + 0.5 * c)?,
        ))
    }
}

impl From<StableMechanism> for Mechanism {
    fn from(m: StableMechanism) -> Self {
        Mechanism::Stable(m)
    }
}

impl From<GeneralMechanism> for Mechanism {
    fn from(m: GeneralMechanism) -> Self {
        Mechanism::General(m)
    }
}

/// Either kind of mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    Stable(StableMechanism),
    General(GeneralMechanism),
}

impl Mechanism {
    pub fn growth(&self) -> f64 {
        match self {
            Mechanism::Stable(m) => m.g,
            Mechanism::General(m) => m.g,
        }
    }

    pub fn psi(&self, lambda: f64) -> Result<f64> {
        match self {
            Mechanism::Stable(m) => m.psi(lambda),
            Mechanism::General(m) => m.psi(lambda),
        }
    }

    pub fn psi0(&self, lambda: f64) -> Result<f64> {
        match self {
            Mechanism::Stable(m) => m.psi0(lambda),
            Mechanism::General(m) => m.psi0(lambda),
        }
    }

    pub fn as_stable(&self) -> Option<&StableMechanism> {
        match self {
            Mechanism::Stable(m) => Some(m),
            Mechanism::General(_) => None,
        }
    }
}
