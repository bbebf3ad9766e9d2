use std::fmt::Write as _;

use crate::error::{require_finite, require_positive, Error, Result};

/// Below this `|c·g|` a segment integral uses the `g = 0` limit.
const FLAT_SLOPE: f64 = 1e-14;

/// One realized environment trajectory on `[0, horizon]`.
///
/// `K_t = g t + Σ_{t_k ≤ t} x_k` with `x_k = log m_k`; `K` is right-continuous
/// and affine with slope `g` between jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    horizon: f64,
    drift: f64,
    times: Vec<f64>,
    log_multipliers: Vec<f64>,
    /// `Δ` just after each jump.
    cumulative: Vec<f64>,
}

/// Affine piece of `K` on `[start, end)` with `K_start = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

/// Discretized exponential functional over `[0, p/q]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    /// `A_{p,q} = Σ_{i=0}^{p} e^{-β K_{i/q}}`.
    pub a_pq: f64,
    /// `(1/q) Σ_{i<p} e^{-β max K}` over each window `[i/q, (i+1)/q]`.
    pub lower: f64,
    /// `(1/q) Σ_{i<p} e^{-β min K}` over each window.
    pub upper: f64,
}

/// The window-start form of the discretization sandwich, evaluated with the
/// first-window subordinator increments `S⁺`, `S⁻` of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSandwich {
    pub lower: f64,
    pub upper: f64,
}

/// `log ∫_0^L e^{c (v + g s)} ds`.
fn log_segment_integral(c: f64, v: f64, g: f64, len: f64) -> f64 {
    let cg = c * g;
    if cg.abs() < FLAT_SLOPE {
        return c * v + len.ln();
    }
    let x = cg * len;
    if x > 0.0 {
        c * v + x + (-(-x).exp_m1()).ln() - cg.ln()
    } else {
        c * v + (-x.exp_m1()).ln() - (-cg).ln()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl JumpPath {
    pub fn new(horizon: f64, drift: f64, jumps: Vec<(f64, f64)>) -> Result<Self> {
        require_positive("horizon", horizon)?;
        require_finite("drift", drift)?;
        let mut times = Vec::with_capacity(jumps.len());
        let mut log_multipliers = Vec::with_capacity(jumps.len());
        let mut cumulative = Vec::with_capacity(jumps.len());
        let mut acc = 0.0;
        let mut last = 0.0;
        for (t, x) in jumps {
            if !(t > last && t <= horizon) {
                return Err(Error::InvalidParameter {
                    name: "jump time",
                    value: t,
                    reason: format!("jump times must be strictly increasing within (0, {horizon}]"),
                });
            }
            require_finite("log multiplier", x)?;
            acc += x;
            last = t;
            times.push(t);
            log_multipliers.push(x);
            cumulative.push(acc);
        }
        Ok(JumpPath {
            horizon,
            drift,
            times,
            log_multipliers,
            cumulative,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn jump_count(&self) -> usize {
        self.times.len()
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn log_multipliers(&self) -> &[f64] {
        &self.log_multipliers
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t",
                value: t,
                reason: "must be >= 0".into(),
            });
        }
        if t > self.horizon * (1.0 + 1e-14) {
            return Err(Error::BeyondHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// `Δ_t`, counting jumps at times `≤ t`.
    pub fn delta_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let n = self.times.partition_point(|&s| s <= t);
        Ok(if n == 0 { 0.0 } else { self.cumulative[n - 1] })
    }

    /// `K_t = g t + Δ_t`.
    pub fn k_at(&self, t: f64) -> Result<f64> {
        Ok(self.drift * t + self.delta_at(t)?)
    }

    /// `K_{t-}`.
    pub fn k_left(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let n = self.times.partition_point(|&s| s < t);
        let d = if n == 0 { 0.0 } else { self.cumulative[n - 1] };
        Ok(self.drift * t + d)
    }

    /// Affine pieces of `K` covering `[from, to]`, split at every jump time.
    pub fn segments(&self, from: f64, to: f64) -> Result<Vec<Segment>> {
        self.check_time(to)?;
        self.check_time(from)?;
        let mut out = Vec::new();
        let mut start = from;
        let first = self.times.partition_point(|&s| s <= from);
        for &jt in &self.times[first..] {
            if jt >= to {
                break;
            }
            out.push(Segment {
                start,
                end: jt,
                value: self.k_at(start)?,
            });
            start = jt;
        }
        if to > start || out.is_empty() {
            out.push(Segment {
                start,
                end: to,
                value: self.k_at(start)?,
            });
        }
        Ok(out)
    }

    /// `log ∫_from^to e^{c K_s} ds`, exact segment by segment.
    pub fn log_exponential_integral(&self, c: f64, from: f64, to: f64) -> Result<f64> {
        if to < from {
            return Err(Error::InvalidParameter {
                name: "to",
                value: to,
                reason: "must be >= from".into(),
            });
        }
        let mut acc = f64::NEG_INFINITY;
        for seg in self.segments(from, to)? {
            let len = seg.end - seg.start;
            if len > 0.0 {
                acc = log_add_exp(acc, log_segment_integral(c, seg.value, self.drift, len));
            }
        }
        Ok(acc)
    }

    /// `log ∫_0^t e^{-β K_s} ds`.
    pub fn log_exp_functional(&self, beta: f64, t: f64) -> Result<f64> {
        require_positive("t", t)?;
        self.log_exponential_integral(-beta, 0.0, t)
    }

    /// Exact `∫_0^t e^{-β K_s} ds`.
    pub fn exp_functional(&self, beta: f64, t: f64) -> Result<f64> {
        Ok(self.log_exp_functional(beta, t)?.exp())
    }

    /// Minimum and maximum of `K` over `[a, b]`, including left limits at jumps.
    pub fn k_range(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for seg in self.segments(a, b)? {
            let v0 = seg.value;
            let v1 = seg.value + self.drift * (seg.end - seg.start);
            lo = lo.min(v0.min(v1));
            hi = hi.max(v0.max(v1));
        }
        Ok((lo, hi))
    }

    /// `A_{p,q}` together with pathwise bounds on `∫_0^{p/q} e^{-βK}` built from
    /// the extrema of `K` in each window.
    pub fn discretized_functional(&self, beta: f64, p: usize, q: usize) -> Result<Discretization> {
        if q == 0 {
            return Err(Error::IndexOutOfRange("q must be >= 1".into()));
        }
        let qf = q as f64;
        if p as f64 / qf > self.horizon * (1.0 + 1e-14) {
            return Err(Error::IndexOutOfRange(format!(
                "p/q = {}/{} exceeds horizon {}",
                p, q, self.horizon
            )));
        }
        let mut a_pq = 0.0;
        let mut lower = 0.0;
        let mut upper = 0.0;
        for i in 0..=p {
            let ti = (i as f64 / qf).min(self.horizon);
            a_pq += (-beta * self.k_at(ti)?).exp();
            if i < p {
                let tn = ((i + 1) as f64 / qf).min(self.horizon);
                let (kmin, kmax) = self.k_range(ti, tn)?;
                lower += (-beta * kmax).exp();
                upper += (-beta * kmin).exp();
            }
        }
        Ok(Discretization {
            a_pq,
            lower: lower / qf,
            upper: upper / qf,
        })
    }

    /// Positive and negative jump mass over `(0, w]`.
    pub fn subordinator_increments(&self, w: f64) -> Result<(f64, f64)> {
        self.check_time(w)?;
        let n = self.times.partition_point(|&s| s <= w);
        let mut plus = 0.0;
        let mut minus = 0.0;
        for &x in &self.log_multipliers[..n] {
            if x > 0.0 {
                plus += x;
            } else {
                minus -= x;
            }
        }
        Ok((plus, minus))
    }

    /// Window-start sandwich with `A` and `S±` supplied by the caller.
    ///
    /// With `A⁽¹⁾ = A_{⌊qt⌋-1,q}`, `A⁽²⁾ = A_{⌊qt⌋,q}` and first-window increments
    /// drawn independently of them, `lower ≤ ∫_0^t e^{-βK} ≤ upper` holds in law.
    pub fn window_sandwich(
        drift: f64,
        beta: f64,
        q: usize,
        a_lower: f64,
        a_upper: f64,
        s_plus: f64,
        s_minus: f64,
    ) -> WindowSandwich {
        let qf = q as f64;
        WindowSandwich {
            lower: (-beta * (drift.abs() / qf + s_plus)).exp() * a_lower / qf,
            upper: (beta * (drift.abs() / qf + s_minus)).exp() * a_upper / qf,
        }
    }

    /// CSV rows `time,log_multiplier` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,log_multiplier\n");
        for (t, x) in self.times.iter().zip(&self.log_multipliers) {
            let _ = writeln!(out, "{t:.16e},{x:.16e}");
        }
        out
    }

    /// Inverse of [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str, horizon: f64, drift: f64) -> Result<Self> {
        let mut jumps = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("time")) {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("malformed path row {}: `{line}`", lineno + 1)))
            };
            let t = parse(parts.next())?;
            let x = parse(parts.next())?;
            jumps.push((t, x));
        }
        Self::new(horizon, drift, jumps)
    }
}
