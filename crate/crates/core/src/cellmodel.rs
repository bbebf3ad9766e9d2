//! Parasites in dividing cells.
//!
//! Cells divide at rate `r`. At a division a cell's parasites are shared: a
//! random fraction `Θ` goes to one daughter and `1 - Θ` to the other. Along the
//! ancestral line of a typical cell, divisions happen at the biased rate `2r`,
//! so the parasite load of that line is a Feller diffusion with catastrophes
//! `ν(dm) = 2r P(Θ ∈ dm)`. The mean number of infected cells is
//! `E[N*_t] = e^{rt} P(Y_t > 0)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::{Atom, Component, EnvironmentSpec, MultiplierLaw};
use crate::error::{require_finite, require_positive, Error, Result};
use crate::mechanisms::StableMechanism;
use crate::montecarlo::{annealed_survival, Method, SurvivalEstimate};
use crate::regimes::{classify, RegimeLabel};

/// Law of the fraction `Θ ∈ (0, 1)` inherited by one daughter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ThetaLaw {
    /// `P(Θ = θ) = P(Θ = 1 - θ) = 1/2`.
    TwoPoint { theta: f64 },
    /// `Beta(a, b)`.
    Beta { a: f64, b: f64 },
}

impl ThetaLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThetaLaw::TwoPoint { theta } => {
                if !(theta > 0.0 && theta < 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "theta",
                        value: theta,
                        reason: "must lie in (0, 1)".into(),
                    });
                }
                Ok(())
            }
            ThetaLaw::Beta { a, b } => MultiplierLaw::Beta { a, b }.validate(),
        }
    }

    /// `E[Θ^λ]`.
    pub fn moment(&self, lambda: f64) -> Result<f64> {
        match *self {
            ThetaLaw::TwoPoint { theta } => {
                Ok(0.5 * (theta.powf(lambda) + (1.0 - theta).powf(lambda)))
            }
            ThetaLaw::Beta { a, b } => MultiplierLaw::Beta { a, b }.moment(lambda),
        }
    }

    /// `E[log Θ]`.
    pub fn mean_log(&self) -> Result<f64> {
        match *self {
            ThetaLaw::TwoPoint { theta } => Ok(0.5 * (theta.ln() + (1.0 - theta).ln())),
            ThetaLaw::Beta { a, b } => MultiplierLaw::Beta { a, b }.moment_log(0.0),
        }
    }

    /// `E[Θ log Θ]`.
    pub fn mean_theta_log(&self) -> Result<f64> {
        match *self {
            ThetaLaw::TwoPoint { theta } => {
                Ok(0.5 * (theta * theta.ln() + (1.0 - theta) * (1.0 - theta).ln()))
            }
            ThetaLaw::Beta { a, b } => MultiplierLaw::Beta { a, b }.moment_log(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellModel {
    /// Parasite growth rate.
    pub g: f64,
    pub sigma2: f64,
    /// Cell division rate.
    pub r: f64,
    pub theta_law: ThetaLaw,
    /// Use the division rate `r` instead of the size-biased `2r` along the
    /// ancestral line. Sensitivity runs only: the infected-cell formulas do
    /// not hold in that case.
    #[serde(default)]
    pub unbiased_rate: bool,
}

impl CellModel {
    pub fn new(g: f64, sigma2: f64, r: f64, theta_law: ThetaLaw) -> Result<Self> {
        let m = CellModel {
            g,
            sigma2,
            r,
            theta_law,
            unbiased_rate: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("g", self.g)?;
        require_positive("sigma2", self.sigma2)?;
        require_positive("r", self.r)?;
        self.theta_law.validate()
    }

    /// Catastrophe rate along the ancestral line.
    pub fn line_rate(&self) -> f64 {
        if self.unbiased_rate {
            self.r
        } else {
            2.0 * self.r
        }
    }
}

/// Environment (drift `g`, `ν = 2r P(Θ ∈ ·)`) and Feller mechanism `(g, σ²)`.
pub fn to_environment(model: &CellModel) -> Result<(EnvironmentSpec, StableMechanism)> {
    model.validate()?;
    let rate = model.line_rate();
    let spec = match model.theta_law {
        ThetaLaw::TwoPoint { theta: 0.5 } => {
            EnvironmentSpec::new(model.g, vec![Atom::new(0.5, rate)], vec![])?
        }
        ThetaLaw::TwoPoint { theta } => EnvironmentSpec::new(
            model.g,
            vec![Atom::new(theta, 0.5 * rate), Atom::new(1.0 - theta, 0.5 * rate)],
            vec![],
        )?,
        ThetaLaw::Beta { a, b } => EnvironmentSpec::new(
            model.g,
            vec![],
            vec![Component {
                rate,
                law: MultiplierLaw::Beta { a, b },
            }],
        )?,
    };
    Ok((spec, StableMechanism::feller(model.g, model.sigma2)?))
}

/// `α = min_{λ ∈ [0,1]} {gλ + 2r(E[Θ^λ] - 1/2)}` and its minimizer, by
/// golden-section search.
pub fn alpha(model: &CellModel) -> Result<(f64, f64)> {
    let rate = model.line_rate();
    let f = |l: f64| -> Result<f64> { Ok(model.g * l + rate * (model.theta_law.moment(l)? - 0.5)) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let (f0, f1, fm) = (f(0.0)?, f(1.0)?, f(mid)?);
    Ok([(fm, mid), (f0, 0.0), (f1, 1.0)]
        .into_iter()
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .expect("three candidates"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfectedReport {
    pub label: RegimeLabel,
    /// Exponential rate of `E[N*_t]`.
    pub growth_rate: f64,
    /// `κ` in `E[N*_t] ~ c t^{-κ} e^{growth_rate · t}`.
    pub poly_exponent: f64,
    /// `α` (weakly subcritical only).
    pub alpha: Option<f64>,
}

impl InfectedReport {
    /// Asymptotic form of `E[N*_t]`.
    pub fn form(&self) -> String {
        match self.label {
            RegimeLabel::StronglySubcritical => "c1*exp(g*t)".into(),
            RegimeLabel::IntermediateSubcritical => "c2*t^(-1/2)*exp(g*t)".into(),
            RegimeLabel::WeaklySubcritical => "c3*t^(-3/2)*exp(alpha*t)".into(),
            RegimeLabel::Critical => "c4*t^(-1/2)*exp(r*t)".into(),
            RegimeLabel::Supercritical => "c5*exp(r*t)".into(),
        }
    }
}

/// Regime of the parasite load and the growth of the mean number of infected cells.
pub fn infected_regime(model: &CellModel) -> Result<InfectedReport> {
    let (spec, mech) = to_environment(model)?;
    let report = classify(&spec, mech.g, 1.0)?;
    let (growth_rate, alpha_value) = match report.label {
        RegimeLabel::WeaklySubcritical => {
            let (a, _) = alpha(model)?;
            (a, Some(a))
        }
        _ => (model.r + report.exp_rate, None),
    };
    Ok(InfectedReport {
        label: report.label,
        growth_rate,
        poly_exponent: report.poly_exponent,
        alpha: alpha_value,
    })
}

/// `g/r = -log(θ(1-θ))`: supercritical above, critical on the curve.
pub fn critical_boundary(theta: f64) -> f64 {
    -(theta * (1.0 - theta)).ln()
}

/// `g/r = -θ log θ - (1-θ) log(1-θ)`: strongly subcritical below, weakly
/// subcritical above (up to the critical boundary).
pub fn entropy_boundary(theta: f64) -> f64 {
    -theta * theta.ln() - (1.0 - theta) * (1.0 - theta).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCell {
    pub theta: f64,
    pub g_over_r: f64,
    pub label: RegimeLabel,
    pub critical_boundary: f64,
    pub entropy_boundary: f64,
}

/// Regime labels of the symmetric two-point model on a `(θ, g/r)` grid, with
/// `r = 1` and `σ² = 1` (neither affects the label).
pub fn phase_diagram(theta_grid: &[f64], g_over_r_grid: &[f64]) -> Result<Vec<PhaseCell>> {
    let mut out = Vec::with_capacity(theta_grid.len() * g_over_r_grid.len());
    for &theta in theta_grid {
        if !(theta > 0.0 && theta < 0.5) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "phase diagram needs θ ∈ (0, 1/2)".into(),
            });
        }
        for &gr in g_over_r_grid {
            let model = CellModel::new(gr, 1.0, 1.0, ThetaLaw::TwoPoint { theta })?;
            let (spec, mech) = to_environment(&model)?;
            out.push(PhaseCell {
                theta,
                g_over_r: gr,
                label: classify(&spec, mech.g, 1.0)?.label,
                critical_boundary: critical_boundary(theta),
                entropy_boundary: entropy_boundary(theta),
            });
        }
    }
    Ok(out)
}

/// CSV with columns `theta,g_over_r,label,critical_boundary,entropy_boundary`.
pub fn phase_diagram_csv(cells: &[PhaseCell]) -> String {
    let mut s = String::from("theta,g_over_r,label,critical_boundary,entropy_boundary\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{},{:.16e},{:.16e}",
            c.theta, c.g_over_r, c.label, c.critical_boundary, c.entropy_boundary
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanInfected {
    /// `e^{rt} · P(Y_t > 0)`.
    pub value: f64,
    pub stderr: f64,
    pub survival: SurvivalEstimate,
}

/// Monte Carlo estimate of `E[N*_t]` starting from one cell with one unit of parasites.
pub fn mean_infected(
    model: &CellModel,
    x0: f64,
    t: f64,
    n: usize,
    method: Method,
    seed: u64,
) -> Result<MeanInfected> {
    require_positive("t", t)?;
    let (spec, mech) = to_environment(model)?;
    let survival = annealed_survival(&mech, x0, &spec, t, n, method, seed)?;
    let scale = (model.r * t).exp();
    Ok(MeanInfected {
        value: scale * survival.value,
        stderr: scale * survival.stderr,
        survival,
    })
}
