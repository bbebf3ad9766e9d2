//! Annealed Monte Carlo estimators.
//!
//! The main target is `a_F(t) = E[F(∫_0^t e^{-β K_s} ds)]`. Survival
//! probabilities of stable mechanisms are the special case
//! `F(x) = 1 - exp(-x₀ (c₊ β x)^{-1/β})`, i.e. the quenched closed form averaged
//! over environments.
//!
//! Replicate `i` always draws from [`stream(seed, i)`](crate::rng::stream) and
//! results are reduced in replicate order, so estimates are bit-identical for
//! any number of worker threads.

pub mod checks;
pub mod stats;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::mechanisms::StableMechanism;
use crate::quenched_stable::sample_feller_grid;
use crate::regimes::{classify, RegimeLabel};
use crate::rng::stream;

pub use checks::*;
pub use stats::{ks_standard_normal, mean_stderr, pairwise_sum, within_se};

/// Bounded Lipschitz correction `h` of a general test function.
pub type Correction = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Positive nonincreasing `F` applied to the exponential functional.
#[derive(Clone)]
pub enum TestFunction {
    /// `F(x) = 1 - exp(-x₀ (c₊ β x)^{-1/β})`.
    Survival { x0: f64, c_plus: f64, beta: f64 },
    /// `F(x) = C_F (x+1)^{-1/β} [1 + (1+x)^{-ς} h(x)]`.
    General {
        c_f: f64,
        beta: f64,
        varsigma: f64,
        h: Correction,
    },
    /// `F ≡ value`, for sanity checks.
    Constant { value: f64, beta: f64 },
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Survival { x0, c_plus, beta } => f
                .debug_struct("Survival")
                .field("x0", x0)
                .field("c_plus", c_plus)
                .field("beta", beta)
                .finish(),
            TestFunction::General {
                c_f,
                beta,
                varsigma,
                ..
            } => f
                .debug_struct("General")
                .field("c_f", c_f)
                .field("beta", beta)
                .field("varsigma", varsigma)
                .finish_non_exhaustive(),
            TestFunction::Constant { value, beta } => f
                .debug_struct("Constant")
                .field("value", value)
                .field("beta", beta)
                .finish(),
        }
    }
}

/// `log(1 + e^a)`.
fn log1p_exp(a: f64) -> f64 {
    if a > 35.0 {
        a
    } else {
        a.exp().ln_1p()
    }
}

impl TestFunction {
    pub fn survival(mech: &StableMechanism, x0: f64) -> Self {
        TestFunction::Survival {
            x0,
            c_plus: mech.c_plus,
            beta: mech.beta,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            TestFunction::Survival { beta, .. }
            | TestFunction::General { beta, .. }
            | TestFunction::Constant { beta, .. } => *beta,
        }
    }

    /// `F(e^{log_x})`; `log_x = -∞` means `x = 0`.
    pub fn eval_log(&self, log_x: f64) -> f64 {
        match self {
            TestFunction::Survival { x0, c_plus, beta } => {
                let log_j = (c_plus * beta).ln() + log_x;
                -(-x0 * (-log_j / beta).exp()).exp_m1()
            }
            TestFunction::General {
                c_f,
                beta,
                varsigma,
                h,
            } => {
                let l1 = log1p_exp(log_x);
                let x = log_x.exp();
                c_f * (-l1 / beta).exp() * (1.0 + (-varsigma * l1).exp() * h(x))
            }
            TestFunction::Constant { value, .. } => *value,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_log(x.ln())
    }

    /// Parameter checks plus positivity and monotonicity on a log grid of
    /// `x ∈ [0, 1e8]`.
    pub fn validate(&self) -> Result<()> {
        let beta = self.beta();
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must lie in (0, 1]".into(),
            });
        }
        match self {
            TestFunction::Survival { x0, c_plus, .. } => {
                crate::error::require_positive("x0", *x0)?;
                crate::error::require_positive("c_plus", *c_plus)?;
            }
            TestFunction::General { c_f, varsigma, .. } => {
                crate::error::require_positive("c_f", *c_f)?;
                if !(*varsigma >= 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "varsigma",
                        value: *varsigma,
                        reason: "must be >= 1".into(),
                    });
                }
            }
            TestFunction::Constant { value, .. } => {
                crate::error::require_positive("value", *value)?;
            }
        }
        let mut prev = self.eval(0.0);
        for i in 0..=400 {
            let x = 10f64.powf(-8.0 + 16.0 * i as f64 / 400.0);
            let v = self.eval(x);
            if !(v > 0.0) || v > prev * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter {
                    name: "F",
                    value: x,
                    reason: format!("F must be positive and nonincreasing (F({x}) = {v})"),
                });
            }
            prev = v;
        }
        Ok(())
    }
}

/// Sampling method for annealed estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Plain,
    /// Esscher tilt by a fixed `λ`.
    Esscher(f64),
    /// Tilt `1` for strongly or intermediate subcritical, `τ` for weakly
    /// subcritical, none otherwise.
    EsscherAuto,
    /// Simulate `Y_t` exactly (`β = 1` survival only).
    FellerExact,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Plain => f.write_str("plain"),
            Method::Esscher(l) => write!(f, "esscher:{l}"),
            Method::EsscherAuto => f.write_str("esscher:auto"),
            Method::FellerExact => f.write_str("feller_exact"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "plain" => return Ok(Method::Plain),
            "esscher:auto" => return Ok(Method::EsscherAuto),
            "feller_exact" | "feller-exact" => return Ok(Method::FellerExact),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("esscher:") {
            let l: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad tilt in method `{s}`")))?;
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("tilt must be finite and >= 0 in `{s}`")));
            }
            return Ok(Method::Esscher(l));
        }
        Err(Error::Config(format!(
            "unknown method `{s}` (expected plain, esscher:LAMBDA, esscher:auto or feller_exact)"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    /// The method actually used (`EsscherAuto` is resolved to a fixed tilt).
    pub method: Method,
    pub horizon: f64,
}

/// Runs `f` on a dedicated pool of `workers` threads (`None`: rayon default).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidParameter {
            name: "workers",
            value: 0.0,
            reason: "must be >= 1".into(),
        }),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// `f(i)` for `i = 0..n`, evaluated in parallel and returned in index order.
pub fn par_replicates<T: Send>(
    n: usize,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..n as u64).into_par_iter().map(f).collect()
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "needs at least 2 replicates".into(),
        });
    }
    Ok(())
}

fn check_times(ts: &[f64]) -> Result<f64> {
    if ts.is_empty() {
        return Err(Error::InvalidParameter {
            name: "t",
            value: f64::NAN,
            reason: "no horizons given".into(),
        });
    }
    for &t in ts {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t",
                value: t,
                reason: "must be finite and >= 0".into(),
            });
        }
    }
    Ok(ts.iter().copied().fold(0.0, f64::max))
}

/// Path horizon covering `t`; sampled paths need a strictly positive horizon.
pub(crate) fn path_horizon(t: f64) -> f64 {
    t.max(f64::MIN_POSITIVE)
}

/// The tilt chosen by [`Method::EsscherAuto`] for `spec` (drift = `g`) and `β`.
pub fn auto_tilt(spec: &EnvironmentSpec, beta: f64) -> Result<f64> {
    let r = classify(spec, spec.drift(), beta)?;
    Ok(match r.label {
        RegimeLabel::StronglySubcritical | RegimeLabel::IntermediateSubcritical => 1.0,
        RegimeLabel::WeaklySubcritical => r.tau.expect("weak regime has τ"),
        RegimeLabel::Critical | RegimeLabel::Supercritical => 0.0,
    })
}

fn resolve(method: Method, spec: &EnvironmentSpec, beta: f64) -> Result<Method> {
    match method {
        Method::EsscherAuto => {
            let l = auto_tilt(spec, beta)?;
            Ok(if l == 0.0 { Method::Plain } else { Method::Esscher(l) })
        }
        m => Ok(m),
    }
}

fn summarize(columns: Vec<Vec<f64>>, ts: &[f64], method: Method) -> Vec<SurvivalEstimate> {
    columns
        .into_iter()
        .zip(ts)
        .map(|(col, &t)| {
            let (value, stderr) = mean_stderr(&col);
            SurvivalEstimate {
                value,
                stderr,
                n: col.len(),
                method,
                horizon: t,
            }
        })
        .collect()
}

fn transpose(rows: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::with_capacity(rows.len()); width];
    for row in rows {
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    cols
}

/// `a_F(t)` at every `t` in `ts`, all horizons sharing one environment path per
/// replicate.
///
/// Under `Esscher(λ)` the environment is drawn from the tilted law and each
/// sample is weighted by `exp(-λ K_t + t φ_K(λ))`.
pub fn a_f_series(
    f: &TestFunction,
    spec: &EnvironmentSpec,
    ts: &[f64],
    method: Method,
    n: usize,
    seed: u64,
) -> Result<Vec<SurvivalEstimate>> {
    check_n(n)?;
    f.validate()?;
    let horizon = check_times(ts)?;
    let beta = f.beta();
    let method = resolve(method, spec, beta)?;
    let lambda = match method {
        Method::Plain => 0.0,
        Method::Esscher(l) => l,
        Method::FellerExact => {
            return Err(Error::Unsupported(
                "feller_exact applies to annealed survival of a β = 1 mechanism".into(),
            ))
        }
        Method::EsscherAuto => unreachable!("resolved above"),
    };
    let sampling = spec.esscher(lambda)?;
    let phi_k = spec.phi_k(lambda)?;
    let rows = par_replicates(n, |i| {
        let mut rng = stream(seed, i);
        let path = sampling.sample_path(path_horizon(horizon), &mut rng)?;
        ts.iter()
            .map(|&t| {
                let value = f.eval_log(path.log_exp_functional(beta, t)?);
                if lambda == 0.0 {
                    Ok(value)
                } else {
                    let log_w = -lambda * path.k_at(t)? + t * phi_k;
                    Ok(value * log_w.exp())
                }
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(summarize(transpose(rows, ts.len()), ts, method))
}

/// Plain estimate of `a_F(t)`.
pub fn a_f_plain(
    f: &TestFunction,
    spec: &EnvironmentSpec,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<SurvivalEstimate> {
    Ok(a_f_series(f, spec, &[t], Method::Plain, n, seed)?[0])
}

/// Esscher-tilted estimate of `a_F(t)`; `tilt = 0` reproduces [`a_f_plain`].
pub fn a_f_esscher(
    f: &TestFunction,
    spec: &EnvironmentSpec,
    t: f64,
    tilt: f64,
    n: usize,
    seed: u64,
) -> Result<SurvivalEstimate> {
    if !(tilt >= 0.0 && tilt < spec.theta_max()) {
        return Err(Error::OutsideExponentDomain {
            lambda: tilt,
            theta_max: spec.theta_max(),
        });
    }
    Ok(a_f_series(f, spec, &[t], Method::Esscher(tilt), n, seed)?[0])
}

/// `P_{x₀}(Y_t > 0)` at every `t` in `ts`, with `K_t = g t + Δ_t` and `g`
/// taken from the mechanism.
pub fn annealed_survival_series(
    mech: &StableMechanism,
    x0: f64,
    spec: &EnvironmentSpec,
    ts: &[f64],
    method: Method,
    n: usize,
    seed: u64,
) -> Result<Vec<SurvivalEstimate>> {
    mech.validate()?;
    let spec = spec.with_drift(mech.g)?;
    if method != Method::FellerExact {
        return a_f_series(&TestFunction::survival(mech, x0), &spec, ts, method, n, seed);
    }
    check_n(n)?;
    let horizon = check_times(ts)?;
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| ts[i]).collect();
    let rows = par_replicates(n, |i| {
        let mut rng = stream(seed, i);
        let path = spec.sample_path(path_horizon(horizon), &mut rng)?;
        let ys = sample_feller_grid(mech, x0, &sorted, &path, &mut rng)?;
        let mut row = vec![0.0; ts.len()];
        for (k, &slot) in order.iter().enumerate() {
            row[slot] = if ys[k] > 0.0 { 1.0 } else { 0.0 };
        }
        Ok(row)
    })?;
    Ok(summarize(transpose(rows, ts.len()), ts, method))
}

/// `P_{x₀}(Y_t > 0)`.
pub fn annealed_survival(
    mech: &StableMechanism,
    x0: f64,
    spec: &EnvironmentSpec,
    t: f64,
    n: usize,
    method: Method,
    seed: u64,
) -> Result<SurvivalEstimate> {
    Ok(annealed_survival_series(mech, x0, spec, &[t], method, n, seed)?[0])
}
