//! Statistical property checks built on the exact `β = 1` sampler.

use serde::Serialize;

use super::{check_n, mean_stderr, par_replicates, path_horizon};
use crate::env::{EnvironmentSpec, JumpPath};
use crate::error::{Error, Result};
use crate::mechanisms::StableMechanism;
use crate::quenched_stable::{absorption_limit, quenched_laplace, quenched_survival, sample_feller_grid};
use crate::rng::stream;

/// Minimum number of survivors for [`clt_check`].
pub const MIN_CLT_SURVIVORS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FellerCheck {
    pub zero_freq: f64,
    pub zero_stderr: f64,
    /// `exp(-x₀ / J_t)` from the closed form.
    pub zero_target: f64,
    pub mean: f64,
    pub mean_stderr: f64,
    /// `x₀ e^{K_t}`.
    pub mean_target: f64,
}

/// Samples `Y_t` `n` times along one fixed path and compares the extinction
/// frequency and the mean with their closed forms.
pub fn feller_sampler_check(
    mech: &StableMechanism,
    x0: f64,
    path: &JumpPath,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<FellerCheck> {
    check_n(n)?;
    let ys = par_replicates(n, |i| {
        Ok(sample_feller_grid(mech, x0, &[t], path, &mut stream(seed, i))?[0])
    })?;
    let zeros: Vec<f64> = ys.iter().map(|&y| if y == 0.0 { 1.0 } else { 0.0 }).collect();
    let (zero_freq, zero_stderr) = mean_stderr(&zeros);
    let (mean, mean_stderr) = mean_stderr(&ys);
    Ok(FellerCheck {
        zero_freq,
        zero_stderr,
        zero_target: 1.0 - quenched_survival(mech, x0, t, path)?,
        mean,
        mean_stderr,
        mean_target: x0 * path.k_at(t)?.exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceCheck {
    pub lambda: f64,
    pub empirical: f64,
    pub stderr: f64,
    /// `exp(-x₀ (J_t + λ^{-β})^{-1/β})`.
    pub closed_form: f64,
}

/// Empirical `E[exp(-λ e^{-K_t} Y_t) | K]` from the sampler against the closed form.
pub fn laplace_duality_check(
    mech: &StableMechanism,
    x0: f64,
    path: &JumpPath,
    t: f64,
    lambdas: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<LaplaceCheck>> {
    check_n(n)?;
    let ys = par_replicates(n, |i| {
        Ok(sample_feller_grid(mech, x0, &[t], path, &mut stream(seed, i))?[0])
    })?;
    let e_k = (-path.k_at(t)?).exp();
    lambdas
        .iter()
        .map(|&lambda| {
            let vals: Vec<f64> = ys.iter().map(|&y| (-lambda * e_k * y).exp()).collect();
            let (empirical, stderr) = mean_stderr(&vals);
            Ok(LaplaceCheck {
                lambda,
                empirical,
                stderr,
                closed_form: quenched_laplace(mech, x0, lambda, t, path)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub t: f64,
    /// Mean of `Z̃_t = e^{-K_t} Y_t`; should equal `x₀`.
    pub z_mean: f64,
    pub z_stderr: f64,
    pub y_mean: f64,
    pub y_stderr: f64,
    /// `x₀ e^{t φ_K(1)}`.
    pub y_target: f64,
}

/// Annealed means of `Z̃_t` and `Y_t` over sampled environments (drift `g`).
pub fn martingale_check(
    mech: &StableMechanism,
    x0: f64,
    spec: &EnvironmentSpec,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    check_n(n)?;
    let spec = spec.with_drift(mech.g)?;
    let pairs = par_replicates(n, |i| {
        let mut rng = stream(seed, i);
        let path = spec.sample_path(path_horizon(t), &mut rng)?;
        let y = sample_feller_grid(mech, x0, &[t], &path, &mut rng)?[0];
        Ok((y, y * (-path.k_at(t)?).exp()))
    })?;
    let ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let zs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (y_mean, y_stderr) = mean_stderr(&ys);
    let (z_mean, z_stderr) = mean_stderr(&zs);
    Ok(MartingaleReport {
        t,
        z_mean,
        z_stderr,
        y_mean,
        y_stderr,
        y_target: x0 * (t * spec.phi_k(1.0)?).exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub ks: f64,
    pub survivors: usize,
    /// `m̂ = g + ∫ log m ν(dm)`.
    pub centering: f64,
    /// `ρ = (∫ (log m)² ν(dm))^{1/2}`.
    pub scale: f64,
}

/// KS distance between `(log Y_t - m̂ t) / (ρ √t)` on `{Y_t > 0}` and the
/// standard normal.
pub fn clt_check(
    mech: &StableMechanism,
    x0: f64,
    spec: &EnvironmentSpec,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<CltReport> {
    check_n(n)?;
    let spec = spec.with_drift(mech.g)?;
    let centering = spec.phi_k_prime(0.0)?;
    if !(centering > 0.0) {
        return Err(Error::AssumptionViolated(format!(
            "the central limit theorem needs φ_K'(0) > 0, got {centering}"
        )));
    }
    let scale = spec.log_jump_second_moment().sqrt();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::AssumptionViolated(
            "the central limit theorem needs 0 < ∫ (log m)² ν(dm) < ∞".into(),
        ));
    }
    let logs = par_replicates(n, |i| {
        let mut rng = stream(seed, i);
        let path = spec.sample_path(path_horizon(t), &mut rng)?;
        let y = sample_feller_grid(mech, x0, &[t], &path, &mut rng)?[0];
        Ok((y > 0.0).then(|| y.ln()))
    })?;
    let normalized: Vec<f64> = logs
        .into_iter()
        .flatten()
        .map(|l| (l - centering * t) / (scale * t.sqrt()))
        .collect();
    if normalized.len() < MIN_CLT_SURVIVORS {
        return Err(Error::InsufficientData(format!(
            "only {} survivors (need {MIN_CLT_SURVIVORS}); increase n or t",
            normalized.len()
        )));
    }
    Ok(CltReport {
        ks: super::ks_standard_normal(&normalized),
        survivors: normalized.len(),
        centering,
        scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WLimitReport {
    /// Frequency of `{Y_T > 0}` among simulated processes.
    pub survival_freq: f64,
    pub survival_stderr: f64,
    /// Environment average of `1 - exp(-x₀ / J_T)`.
    pub survival_closed_form: f64,
    pub survival_closed_form_stderr: f64,
    /// Mean of `Z̃_T`, the proxy for `E[W]`.
    pub mean_w: f64,
    pub mean_w_stderr: f64,
}

/// Large-horizon proxies for `P(W > 0)` and `E[W]` in the supercritical regime.
pub fn w_limit_estimate(
    mech: &StableMechanism,
    x0: f64,
    spec: &EnvironmentSpec,
    t_large: f64,
    n: usize,
    seed: u64,
) -> Result<WLimitReport> {
    check_n(n)?;
    let spec = spec.with_drift(mech.g)?;
    let d0 = spec.phi_k_prime(0.0)?;
    if !(d0 > 0.0) {
        return Err(Error::AssumptionViolated(format!(
            "the limit W is nondegenerate only when φ_K'(0) > 0, got {d0}"
        )));
    }
    let rows = par_replicates(n, |i| {
        let mut rng = stream(seed, i);
        let path = spec.sample_path(t_large, &mut rng)?;
        let y = sample_feller_grid(mech, x0, &[t_large], &path, &mut rng)?[0];
        let absorbed = absorption_limit(mech, x0, &path)?.probability;
        Ok([
            if y > 0.0 { 1.0 } else { 0.0 },
            1.0 - absorbed,
            y * (-path.k_at(t_large)?).exp(),
        ])
    })?;
    let col = |k: usize| mean_stderr(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    let (survival_freq, survival_stderr) = col(0);
    let (survival_closed_form, survival_closed_form_stderr) = col(1);
    let (mean_w, mean_w_stderr) = col(2);
    Ok(WLimitReport {
        survival_freq,
        survival_stderr,
        survival_closed_form,
        survival_closed_form_stderr,
        mean_w,
        mean_w_stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscretizationMeans {
    pub q: usize,
    /// Mean of the window-maximum lower bound.
    pub lower: f64,
    /// Mean of `∫_0^{p/q} e^{-βK}`, `p = ⌊qt⌋`.
    pub exact: f64,
    pub upper: f64,
    /// Mean of `A_{p,q} / q`.
    pub riemann: f64,
}

/// Averages of the discretized functional and its window bounds over `n` paths.
pub fn discretization_means(
    spec: &EnvironmentSpec,
    beta: f64,
    t: f64,
    qs: &[usize],
    n: usize,
    seed: u64,
) -> Result<Vec<DiscretizationMeans>> {
    check_n(n)?;
    let rows = par_replicates(n, |i| {
        let path = spec.sample_path(t, &mut stream(seed, i))?;
        qs.iter()
            .map(|&q| {
                let p = (q as f64 * t).floor() as usize;
                let d = path.discretized_functional(beta, p, q)?;
                let exact = path.exp_functional(beta, p as f64 / q as f64)?;
                Ok([d.lower, exact, d.upper, d.a_pq / q as f64])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(qs
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let col = |j: usize| mean_stderr(&rows.iter().map(|r| r[k][j]).collect::<Vec<_>>()).0;
            DiscretizationMeans {
                q,
                lower: col(0),
                exact: col(1),
                upper: col(2),
                riemann: col(3),
            }
        })
        .collect())
}

/// `|A_{⌊qt⌋,q} / q - ∫_0^t e^{-βK}|` for each `q`, on one path.
pub fn discretization_errors(path: &JumpPath, beta: f64, t: f64, qs: &[usize]) -> Result<Vec<f64>> {
    let exact = path.exp_functional(beta, t)?;
    qs.iter()
        .map(|&q| {
            let p = (q as f64 * t).floor() as usize;
            Ok((path.discretized_functional(beta, p, q)?.a_pq / q as f64 - exact).abs())
        })
        .collect()
}
