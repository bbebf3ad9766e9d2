//! TOML model files.
//!
//! ```toml
//! x0 = 1.0
//!
//! [mechanism]
//! kind = "stable"          # or "general"
//! g = 0.1
//! c_plus = 1.0
//! beta = 1.0
//!
//! [environment]
//! # drift defaults to the mechanism's g
//! atoms = [{ m = 0.5, rate = 1.0 }]
//! components = [{ rate = 0.5, family = "beta", a = 2.0, b = 5.0 }]
//!
//! [environment.dense]      # optional truncated |m-1|^{-exponent} density
//! scale = 0.8
//! exponent = 0.5
//! lo = 0.0
//! hi = 2.5
//! eps_below = 0.01
//! eps_above = 0.01
//!
//! [cell]                   # alternative to [mechanism] + [environment]
//! g = 0.4
//! sigma2 = 1.0
//! r = 1.0
//! theta_law = { family = "two_point", theta = 0.25 }
//!
//! [run]                    # defaults for command-line flags
//! seed = 7
//! n = 10000
//! t_grid = "10:60:10"
//! method = "esscher:auto"
//! ```

use serde::{Deserialize, Serialize};

use crate::cellmodel::{to_environment, CellModel};
use crate::env::{Atom, Component, DenseCatastrophes, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::mechanisms::{GeneralMechanism, Mechanism, ReproductionAtom, ReproductionDensity, StableMechanism};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub x0: Option<f64>,
    pub mechanism: Option<MechanismConfig>,
    pub environment: Option<EnvironmentConfig>,
    pub cell: Option<CellModel>,
    pub run: Option<RunDefaults>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismConfig {
    Stable {
        g: f64,
        c_plus: f64,
        beta: f64,
    },
    General {
        g: f64,
        sigma2: f64,
        #[serde(default)]
        mu_atoms: Vec<ReproductionAtom>,
        #[serde(default)]
        mu_density: Option<ReproductionDensity>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub drift: Option<f64>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub components: Vec<Component>,
    pub dense: Option<DenseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseConfig {
    pub scale: f64,
    pub exponent: f64,
    pub lo: f64,
    pub hi: f64,
    pub eps_below: f64,
    pub eps_above: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDefaults {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub t_grid: Option<String>,
    pub method: Option<String>,
    pub workers: Option<usize>,
}

/// A fully resolved model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: EnvironmentSpec,
    pub mechanism: Mechanism,
    pub x0: f64,
    pub cell: Option<CellModel>,
}

impl Model {
    /// `β` of a stable mechanism; general mechanisms count as `β = 1`.
    pub fn beta(&self) -> f64 {
        self.mechanism.as_stable().map_or(1.0, |m| m.beta)
    }

    pub fn stable(&self) -> Result<&StableMechanism> {
        self.mechanism
            .as_stable()
            .ok_or_else(|| Error::Unsupported("this command needs a stable mechanism".into()))
    }
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.mechanism.is_none() && self.environment.is_none() && self.cell.is_none()
    }

    pub fn resolve(&self) -> Result<Model> {
        let x0 = self.x0.unwrap_or(1.0);
        crate::error::require_positive("x0", x0)?;
        if let Some(cell) = &self.cell {
            if self.mechanism.is_some() || self.environment.is_some() {
                return Err(Error::Config(
                    "[cell] defines its own mechanism and environment; drop [mechanism] and [environment]"
                        .into(),
                ));
            }
            let (spec, mech) = to_environment(cell)?;
            return Ok(Model {
                spec,
                mechanism: mech.into(),
                x0,
                cell: Some(*cell),
            });
        }
        let mechanism: Mechanism = match self.mechanism.clone() {
            None => {
                return Err(Error::Config(
                    "model file needs a [mechanism] (or a [cell]) section".into(),
                ))
            }
            Some(MechanismConfig::Stable { g, c_plus, beta }) => StableMechanism::new(g, c_plus, beta)?.into(),
            Some(MechanismConfig::General {
                g,
                sigma2,
                mu_atoms,
                mu_density,
            }) => GeneralMechanism::new(g, sigma2, mu_atoms, mu_density)?.into(),
        };
        let g = mechanism.growth();
        let env = self.environment.clone().unwrap_or_default();
        if let Some(d) = env.drift {
            if (d - g).abs() > 1e-12 * (1.0 + g.abs()) {
                return Err(Error::Config(format!(
                    "environment drift {d} differs from the mechanism's g = {g}"
                )));
            }
        }
        let spec = match env.dense {
            None => EnvironmentSpec::new(g, env.atoms, env.components)?,
            Some(d) => {
                let truncated = DenseCatastrophes {
                    drift: g,
                    scale: d.scale,
                    exponent: d.exponent,
                    lo: d.lo,
                    hi: d.hi,
                    atoms: env.atoms,
                }
                .truncate(d.eps_below, d.eps_above)?;
                let mut components = truncated.components().to_vec();
                components.extend(env.components);
                EnvironmentSpec::new(g, truncated.atoms().to_vec(), components)?
            }
        };
        Ok(Model {
            spec,
            mechanism,
            x0,
            cell: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MultiplierLaw;

    #[test]
    fn stable_model() {
        let cfg = ModelConfig::parse(
            r#"
            x0 = 2.0
            [mechanism]
            kind = "stable"
            g = 0.1
            c_plus = 1.0
            beta = 0.5
            [environment]
            atoms = [{ m = 0.5, rate = 1.0 }]
            components = [{ rate = 0.5, family = "beta", a = 2.0, b = 5.0 }]
            "#,
        )
        .unwrap();
        let m = cfg.resolve().unwrap();
        assert_eq!(m.x0, 2.0);
        assert_eq!(m.beta(), 0.5);
        assert_eq!(m.spec.drift(), 0.1);
        assert_eq!(m.spec.atoms().len(), 1);
        assert_eq!(m.spec.components()[0].law, MultiplierLaw::Beta { a: 2.0, b: 5.0 });
    }

    #[test]
    fn general_model_with_dense_part() {
        let cfg = ModelConfig::parse(
            r#"
            [mechanism]
            kind = "general"
            g = 0.0
            sigma2 = 1.0
            mu_atoms = [{ z = 1.0, rate = 1.0 }]
            mu_density = { family = "exponential", mass = 1.0, rate = 2.0 }
            [environment]
            drift = 0.0
            [environment.dense]
            scale = 0.8
            exponent = 0.5
            lo = 0.0
            hi = 2.5
            eps_below = 0.1
            eps_above = 0.1
            "#,
        )
        .unwrap();
        let m = cfg.resolve().unwrap();
        assert!(m.mechanism.as_stable().is_none());
        assert!(m.spec.total_rate() > 0.0);
    }

    #[test]
    fn cell_model() {
        let cfg = ModelConfig::parse(
            r#"
            [cell]
            g = 0.4
            sigma2 = 1.0
            r = 1.0
            theta_law = { family = "two_point", theta = 0.25 }
            "#,
        )
        .unwrap();
        let m = cfg.resolve().unwrap();
        assert_eq!(m.spec.atoms().len(), 2);
        assert!(m.cell.is_some());
    }

    #[test]
    fn errors() {
        assert!(ModelConfig::parse("").unwrap().resolve().is_err());
        assert!(ModelConfig::parse("bogus = 1").is_err());
        let mismatch = ModelConfig::parse(
            r#"
            [mechanism]
            kind = "stable"
            g = 0.1
            c_plus = 1.0
            beta = 1.0
            [environment]
            drift = 0.2
            "#,
        )
        .unwrap();
        assert!(matches!(mismatch.resolve(), Err(Error::Config(_))));
    }
}
