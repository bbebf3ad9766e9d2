//! Closed-form quenched quantities for stable mechanisms.
//!
//! Along a fixed environment path, with `J_t = c₊ β ∫_0^t e^{-β K_s} ds`,
//!
//! * `P(Y_t > 0 | K) = 1 - exp(-x₀ J_t^{-1/β})`,
//! * `E[exp(-λ e^{-K_t} Y_t) | K] = exp(-x₀ (J_t + λ^{-β})^{-1/β})`.
//!
//! For `β = 1` the transition of `Y` over any interval is a Poisson number of
//! exponential clusters, which gives an exact sampler on a time grid.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use crate::env::JumpPath;
use crate::error::{require_positive, Error, Result};
use crate::mechanisms::StableMechanism;

/// Poisson means above this are drawn from the normal approximation.
const POISSON_NORMAL_SWITCH: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchedStableResult {
    pub survival_prob: f64,
    /// `J = c₊ β ∫_0^t e^{-β K_s} ds`.
    pub functional_j: f64,
    pub log_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionEstimate {
    /// `exp(-x₀ J_T^{-1/β})`, nondecreasing in `T`.
    pub probability: f64,
    /// Approximate `∫_T^∞ e^{-β K_s} ds` when `K_T / T > 0`.
    pub tail_bound: Option<f64>,
}

pub(crate) fn check_drift(mech_g: f64, path: &JumpPath) -> Result<()> {
    if (mech_g - path.drift()).abs() > 1e-12 * (1.0 + mech_g.abs()) {
        return Err(Error::InvalidParameter {
            name: "path drift",
            value: path.drift(),
            reason: format!("the environment drift must equal the growth rate g = {mech_g}"),
        });
    }
    Ok(())
}

/// `log J_t`.
pub fn log_functional(mech: &StableMechanism, t: f64, path: &JumpPath) -> Result<f64> {
    check_drift(mech.g, path)?;
    Ok((mech.c_plus * mech.beta).ln() + path.log_exp_functional(mech.beta, t)?)
}

/// `1 - exp(-x₀ e^{-(log J)/β})`.
pub fn survival_from_log_functional(x0: f64, beta: f64, log_j: f64) -> f64 {
    let rate = x0 * (-log_j / beta).exp();
    -(-rate).exp_m1()
}

pub fn quenched_result(
    mech: &StableMechanism,
    x0: f64,
    t: f64,
    path: &JumpPath,
) -> Result<QuenchedStableResult> {
    require_positive("x0", x0)?;
    let log_j = log_functional(mech, t, path)?;
    Ok(QuenchedStableResult {
        survival_prob: survival_from_log_functional(x0, mech.beta, log_j),
        functional_j: log_j.exp(),
        log_j,
    })
}

/// `P_{x₀}(Y_t > 0 | K)`.
pub fn quenched_survival(mech: &StableMechanism, x0: f64, t: f64, path: &JumpPath) -> Result<f64> {
    Ok(quenched_result(mech, x0, t, path)?.survival_prob)
}

/// `E_{x₀}[exp(-λ Z̃_t) | K]` with `Z̃_t = e^{-K_t} Y_t`.
pub fn quenched_laplace(
    mech: &StableMechanism,
    x0: f64,
    lambda: f64,
    t: f64,
    path: &JumpPath,
) -> Result<f64> {
    require_positive("x0", x0)?;
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must be >= 0".into(),
        });
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let j = log_functional(mech, t, path)?.exp();
    let inner = j + lambda.powf(-mech.beta);
    Ok((-x0 * inner.powf(-1.0 / mech.beta)).exp())
}

/// Probability of absorption by the path horizon, as a lower approximation of
/// eventual absorption.
pub fn absorption_limit(mech: &StableMechanism, x0: f64, path: &JumpPath) -> Result<AbsorptionEstimate> {
    require_positive("x0", x0)?;
    let horizon = path.horizon();
    let log_j = log_functional(mech, horizon, path)?;
    let probability = 1.0 - survival_from_log_functional(x0, mech.beta, log_j);
    let k_end = path.k_at(horizon)?;
    let slope = k_end / horizon;
    let tail_bound = (slope > 0.0).then(|| (-mech.beta * k_end).exp() / (mech.beta * slope));
    Ok(AbsorptionEstimate {
        probability,
        tail_bound,
    })
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        0.0
    } else if mean < POISSON_NORMAL_SWITCH {
        Poisson::new(mean).expect("finite positive mean").sample(rng)
    } else {
        let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
        (mean + mean.sqrt() * z).round().max(0.0)
    }
}

/// One exact `β = 1` transition of `Y` from `y` at time `a` to time `b`.
pub fn feller_transition<R: Rng + ?Sized>(
    mech: &StableMechanism,
    y: f64,
    a: f64,
    b: f64,
    path: &JumpPath,
    rng: &mut R,
) -> Result<f64> {
    if !mech.is_feller() {
        return Err(Error::Unsupported(format!(
            "exact path sampling needs beta = 1 (got {})",
            mech.beta
        )));
    }
    if b < a {
        return Err(Error::InvalidParameter {
            name: "grid time",
            value: b,
            reason: "grid times must be nondecreasing".into(),
        });
    }
    if y <= 0.0 || b == a {
        return Ok(y.max(0.0));
    }
    let k_a = path.k_at(a)?;
    let k_b = path.k_at(b)?;
    // J = c₊ ∫_a^b e^{-(K_s - K_a)} ds
    let log_j = mech.c_plus.ln() + path.log_exponential_integral(-1.0, a, b)? + k_a;
    let clusters = sample_poisson(y * (-log_j).exp(), rng);
    if clusters == 0.0 {
        return Ok(0.0);
    }
    let scale = (log_j + k_b - k_a).exp();
    Ok(Gamma::new(clusters, scale)
        .map_err(|e| Error::InvalidParameter {
            name: "gamma scale",
            value: scale,
            reason: e.to_string(),
        })?
        .sample(rng))
}

/// Exact draw of `(Y_{t_1}, …, Y_{t_n})` given the environment, for `β = 1`.
pub fn sample_feller_grid<R: Rng + ?Sized>(
    mech: &StableMechanism,
    x0: f64,
    grid_times: &[f64],
    path: &JumpPath,
    rng: &mut R,
) -> Result<Vec<f64>> {
    require_positive("x0", x0)?;
    check_drift(mech.g, path)?;
    let mut out = Vec::with_capacity(grid_times.len());
    let mut y = x0;
    let mut last = 0.0;
    for &t in grid_times {
        y = feller_transition(mech, y, last, t, path, rng)?;
        out.push(y);
        last = t;
    }
    Ok(out)
}
