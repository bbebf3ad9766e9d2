//! Backward equation for the quenched Laplace exponent.
//!
//! Along a path `K`, `E_{x₀}[exp(-λ e^{-K_t} Y_t) | K] = exp(-x₀ v_0)` where
//!
//! ```text
//! ∂v/∂s = e^{K_s} ψ₀(e^{-K_s} v),   v(t) = λ.
//! ```
//!
//! The equation is integrated backward segment by segment, with every jump
//! time as a mesh point. When `e^{-K} v` is large the unknown is switched to
//! `w = log v`.

pub mod solver;

use crate::env::{JumpPath, Segment};
use crate::error::{require_positive, Error, Result};
use crate::mechanisms::{GeneralMechanism, Mechanism};
use crate::quenched_stable::{check_drift, quenched_survival};

pub use solver::StepStats;

/// Above this value of `e^{-K} v` a segment is solved for `log v`.
pub const LOG_SWITCH: f64 = 1e8;

/// Default relative tolerance of the adaptive solver.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub v0: f64,
    /// Accepted `(s, v_s)` pairs, from `s = t` down to `s = 0`.
    pub trace: Vec<(f64, f64)>,
    pub tolerance: f64,
    pub stats: StepStats,
}

/// Lower and upper bounds on `P_{x₀}(Y_t > 0 | K)` from a ladder of `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalBracket {
    pub lower: f64,
    pub upper: f64,
    /// `(λ, v_0(λ))` for each rung.
    pub ladder: Vec<(f64, f64)>,
}

/// `λ = 10^0, …, 10^6`.
pub fn default_ladder() -> Vec<f64> {
    (0..=6).map(|k| 10f64.powi(k)).collect()
}

// Both right-hand sides use the time to go `r = seg.end - s`, so that the
// boundary layer right after `r = 0` is resolved in floating point however
// large `s` is. `K` at `r` is `k_end - g r` and `dv/dr = -∂v/∂s`.

fn k_end(seg: Segment, g: f64) -> f64 {
    seg.value + g * (seg.end - seg.start)
}

fn linear_rhs(mech: &Mechanism, seg: Segment, g: f64) -> impl Fn(f64, f64) -> f64 + '_ {
    let ke = k_end(seg, g);
    move |r, v| {
        let k = ke - g * r;
        let u = (-k).exp() * v;
        if !(u >= 0.0) {
            return f64::NAN;
        }
        match mech.psi0(u) {
            Ok(p) => -k.exp() * p,
            Err(_) => f64::NAN,
        }
    }
}

fn log_rhs(mech: &Mechanism, seg: Segment, g: f64) -> impl Fn(f64, f64) -> f64 + '_ {
    let ke = k_end(seg, g);
    move |r, w| {
        let k = ke - g * r;
        let u = (w - k).exp();
        match mech.psi0(u) {
            Ok(p) => -p / u,
            Err(_) => f64::NAN,
        }
    }
}

fn use_log(seg: Segment, g: f64, v: f64) -> bool {
    let k_min = seg.value.min(k_end(seg, g));
    (-k_min).exp() * v > LOG_SWITCH
}

fn check_inputs(mech: &Mechanism, lambda: f64, t: f64, path: &JumpPath) -> Result<Vec<Segment>> {
    require_positive("lambda", lambda)?;
    check_drift(mech.growth(), path)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "must be >= 0".into(),
        });
    }
    path.segments(0.0, t)
}

/// Solves the backward equation from `v(t) = λ` to `s = 0` with adaptive steps.
pub fn solve_backward(
    mech: &Mechanism,
    lambda: f64,
    t: f64,
    path: &JumpPath,
    tol: f64,
) -> Result<OdeSolution> {
    require_positive("tol", tol)?;
    let segments = check_inputs(mech, lambda, t, path)?;
    let g = mech.growth();
    let mut v = lambda;
    let mut trace = vec![(t, v)];
    let mut stats = StepStats {
        accepted: 0,
        rejected: 0,
    };
    let mut h: Option<f64> = None;
    for seg in segments.into_iter().rev() {
        let len = seg.end - seg.start;
        let (next, st, last_h) = if use_log(seg, g, v) {
            let (w, st, lh) = solver::integrate_adaptive(
                log_rhs(mech, seg, g),
                0.0,
                v.ln(),
                len,
                0.0,
                tol,
                h,
                |r, w| trace.push((seg.end - r, w.exp())),
            )?;
            (w.exp(), st, lh)
        } else {
            solver::integrate_adaptive(
                linear_rhs(mech, seg, g),
                0.0,
                v,
                len,
                tol,
                0.0,
                h,
                |r, v| trace.push((seg.end - r, v)),
            )?
        };
        if !(next > 0.0 && next.is_finite()) {
            return Err(Error::SolverFailure {
                s: seg.start,
                reason: format!("solution left (0, ∞): v = {next}"),
            });
        }
        v = next;
        stats.accepted += st.accepted;
        stats.rejected += st.rejected;
        if last_h > 0.0 {
            h = Some(last_h);
        }
    }
    Ok(OdeSolution {
        v0: v,
        trace,
        tolerance: tol,
        stats,
    })
}

/// Same equation with `steps_per_unit` equal steps per unit time on each segment
/// (at least one per segment) and no error control.
pub fn solve_backward_fixed(
    mech: &Mechanism,
    lambda: f64,
    t: f64,
    path: &JumpPath,
    steps_per_unit: f64,
) -> Result<f64> {
    require_positive("steps_per_unit", steps_per_unit)?;
    let segments = check_inputs(mech, lambda, t, path)?;
    let g = mech.growth();
    let mut v = lambda;
    for seg in segments.into_iter().rev() {
        let len = seg.end - seg.start;
        let n = (len * steps_per_unit).ceil().max(1.0) as usize;
        v = if use_log(seg, g, v) {
            solver::integrate_fixed(log_rhs(mech, seg, g), 0.0, v.ln(), len, n).exp()
        } else {
            solver::integrate_fixed(linear_rhs(mech, seg, g), 0.0, v, len, n)
        };
    }
    Ok(v)
}

fn survival_from_v(x0: f64, v: f64) -> f64 {
    if v.is_infinite() {
        1.0
    } else {
        -(-x0 * v).exp_m1()
    }
}

/// Brackets `P_{x₀}(Y_t > 0 | K) = 1 - exp(-x₀ lim_{λ→∞} v_0(λ))`.
///
/// The lower bound uses the largest `λ`. The upper bound extrapolates to
/// `λ = ∞`: exactly through `v^{-β} - λ^{-β}` for a stable mechanism, and for
/// a general one by extending `1/v` linearly in `1/λ` through the last two
/// rungs with twice the observed drop.
pub fn survival_general(
    mech: &Mechanism,
    x0: f64,
    t: f64,
    path: &JumpPath,
    ladder: &[f64],
    tol: f64,
) -> Result<SurvivalBracket> {
    require_positive("x0", x0)?;
    let mut lams: Vec<f64> = ladder.to_vec();
    lams.sort_by(f64::total_cmp);
    lams.dedup();
    let min_rungs = if mech.as_stable().is_some() { 1 } else { 2 };
    if lams.len() < min_rungs {
        return Err(Error::InvalidParameter {
            name: "ladder",
            value: lams.len() as f64,
            reason: format!("needs at least {min_rungs} distinct values of lambda"),
        });
    }
    if let Mechanism::General(m) = mech {
        check_drift(m.g, path)?;
        if m.sigma2 == 0.0 && m.mu_atoms.is_empty() && m.mu_density.is_none() {
            // no branching: the process never reaches zero
            return Ok(SurvivalBracket {
                lower: 1.0,
                upper: 1.0,
                ladder: lams.iter().map(|&l| (l, l)).collect(),
            });
        }
    }
    let mut rungs = Vec::with_capacity(lams.len());
    for &lam in &lams {
        rungs.push((lam, solve_backward(mech, lam, t, path, tol)?.v0));
    }
    let (lam_k, v_k) = *rungs.last().unwrap();
    let lower = survival_from_v(x0, v_k);
    let v_inf = match mech {
        Mechanism::Stable(m) => {
            let r = v_k.powf(-m.beta) - lam_k.powf(-m.beta);
            if r > 0.0 {
                r.powf(-1.0 / m.beta)
            } else {
                f64::INFINITY
            }
        }
        Mechanism::General(_) => {
            let (lam_j, v_j) = rungs[rungs.len() - 2];
            let (x_j, x_k) = (1.0 / lam_j, 1.0 / lam_k);
            let (u_j, u_k) = (1.0 / v_j, 1.0 / v_k);
            let drop = (u_j - u_k) * x_k / (x_j - x_k);
            let u = u_k - 2.0 * drop.max(0.0);
            if u > 0.0 {
                1.0 / u
            } else {
                f64::INFINITY
            }
        }
    };
    Ok(SurvivalBracket {
        lower,
        upper: survival_from_v(x0, v_inf).max(lower),
        ladder: rungs,
    })
}

/// `(P under ψ₊, P under ψ₋)`: survival under the two quadratic mechanisms that
/// sandwich `ψ`, each in closed form.
pub fn survival_sandwich(
    mech: &GeneralMechanism,
    x0: f64,
    t: f64,
    path: &JumpPath,
) -> Result<(f64, f64)> {
    let (minus, plus) = mech.sandwich()?;
    Ok((
        quenched_survival(&plus, x0, t, path)?,
        quenched_survival(&minus, x0, t, path)?,
    ))
}
