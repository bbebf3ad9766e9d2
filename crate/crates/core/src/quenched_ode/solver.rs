//! Scalar Dormand–Prince 5(4) integrator with relative error control.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Result of one Runge–Kutta step: the fifth-order value and the error estimate.
fn dp_step(f: &impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64, k1: f64) -> (f64, f64, f64) {
    let k2 = f(x + C2 * h, y + h * A21 * k1);
    let k3 = f(x + C3 * h, y + h * (A31 * k1 + A32 * k2));
    let k4 = f(x + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
    let k5 = f(x + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
    let k6 = f(x + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
    let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
    let k7 = f(x + h, y_new);
    let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    (y_new, err, k7)
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` with adaptive steps.
///
/// The local error is measured against `rtol · max(|y|, |y_new|) + atol`.
/// A non-finite right-hand side rejects the step. `on_step` sees every
/// accepted `(x, y)`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_adaptive(
    f: impl Fn(f64, f64) -> f64,
    x0: f64,
    y0: f64,
    x1: f64,
    rtol: f64,
    atol: f64,
    h_init: Option<f64>,
    mut on_step: impl FnMut(f64, f64),
) -> Result<(f64, StepStats, f64)> {
    let span = x1 - x0;
    let mut stats = StepStats {
        accepted: 0,
        rejected: 0,
    };
    if span == 0.0 {
        return Ok((y0, stats, 0.0));
    }
    let dir = span.signum();
    // smallest step that still moves x
    let min_step = |x: f64| 8.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, y);
    if !k1.is_finite() {
        return Err(Error::SolverFailure {
            s: x0,
            reason: format!("non-finite derivative at the initial point (y = {y0})"),
        });
    }
    let mut h = match h_init {
        Some(h) => h.abs().min(span.abs()),
        None => {
            let guess = if k1 != 0.0 {
                0.01 * y.abs().max(atol / rtol) / k1.abs()
            } else {
                span.abs()
            };
            guess.min(span.abs()).max(min_step(x0))
        }
    } * dir;
    let mut last_h = h.abs();
    while (x1 - x) * dir > 0.0 {
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        let (y_new, err, k7) = dp_step(&f, x, y, h, k1);
        let sc = rtol * y.abs().max(y_new.abs()) + atol;
        let ratio = if y_new.is_finite() && k7.is_finite() && err.is_finite() {
            (err / sc).abs()
        } else {
            f64::INFINITY
        };
        if ratio <= 1.0 {
            x = if (x1 - (x + h)) * dir <= 0.0 { x1 } else { x + h };
            y = y_new;
            k1 = k7;
            last_h = h.abs();
            stats.accepted += 1;
            on_step(x, y);
            let fac = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            stats.rejected += 1;
            let fac = if ratio.is_finite() {
                (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            if h.abs() < min_step(x) {
                return Err(Error::SolverFailure {
                    s: x,
                    reason: format!(
                        "step size {:.3e} below minimum (error ratio {ratio:.3e}, y = {y:.6e})",
                        h.abs()
                    ),
                });
            }
        }
    }
    Ok((y, stats, last_h))
}

/// Same integrator with `n` equal steps and no error control.
pub fn integrate_fixed(f: impl Fn(f64, f64) -> f64, x0: f64, y0: f64, x1: f64, n: usize) -> f64 {
    let h = (x1 - x0) / n as f64;
    let mut y = y0;
    let mut k1 = f(x0, y0);
    for i in 0..n {
        let x = x0 + i as f64 * h;
        let (y_new, _, k7) = dp_step(&f, x, y, h, k1);
        y = y_new;
        k1 = k7;
    }
    y
}
