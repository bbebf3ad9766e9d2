//! Finite-activity approximation of catastrophe measures with infinite mass
//! near `m = 1`.

use serde::{Deserialize, Serialize};

use super::law::MultiplierLaw;
use super::spec::{Atom, Component, EnvironmentSpec};
use crate::error::{require_finite, require_positive, Error, Result};

/// `ν(dm) = scale · |m - 1|^(-exponent) dm` on `(lo, hi)`, plus atoms.
///
/// For `exponent ≥ 1` the density has infinite mass near 1 and can only be
/// simulated after [`truncate`](Self::truncate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseCatastrophes {
    pub drift: f64,
    pub scale: f64,
    pub exponent: f64,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

impl DenseCatastrophes {
    /// Restriction of `ν` to `(0, 1-eps1) ∪ (1+eps2, ∞)`.
    pub fn truncate(&self, eps1: f64, eps2: f64) -> Result<EnvironmentSpec> {
        require_finite("drift", self.drift)?;
        require_positive("scale", self.scale)?;
        if !(eps1 > 0.0 && eps1 < 1.0) {
            return Err(Error::InvalidParameter {
                name: "eps1",
                value: eps1,
                reason: "must lie in (0, 1)".into(),
            });
        }
        require_positive("eps2", eps2)?;
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .copied()
            .filter(|a| a.multiplier <= 1.0 - eps1 || a.multiplier >= 1.0 + eps2)
            .collect();
        let law = MultiplierLaw::PowerNearOne {
            lo: self.lo,
            hi: self.hi,
            exponent: self.exponent,
            eps_below: eps1,
            eps_above: eps2,
            tilt: 0.0,
        };
        let mut components = Vec::new();
        let (below, above) = match law.validate() {
            Ok(()) => law.near_one_piece_masses(),
            Err(Error::InvalidParameter { name: "eps", .. }) => (0.0, 0.0),
            Err(e) => return Err(e),
        };
        let mass = self.scale * (below + above);
        if !mass.is_finite() {
            return Err(Error::InfiniteMass(format!("truncated mass {mass}")));
        }
        if mass > 0.0 {
            components.push(Component { rate: mass, law });
        }
        EnvironmentSpec::new(self.drift, atoms, components)
    }
}
