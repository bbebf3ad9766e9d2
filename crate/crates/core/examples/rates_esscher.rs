//! Estimates tiny annealed survival probabilities with an Esscher tilt and
//! fits the exponential rate and polynomial exponent.
//!
//! cargo run --release --example rates_esscher

use csbpc::env::EnvironmentSpec;
use csbpc::mechanisms::StableMechanism;
use csbpc::montecarlo::{annealed_survival_series, Method};
use csbpc::regimes::{classify, fit_rate};

fn main() -> csbpc::Result<()> {
    let g = 0.1;
    let spec = EnvironmentSpec::with_atoms(g, &[(0.5, 1.0)])?;
    let mech = StableMechanism::feller(g, 1.0)?;
    let ts: Vec<f64> = (1..=6).map(|k| 10.0 * k as f64).collect();

    for method in [Method::Plain, Method::Esscher(1.0)] {
        let est = annealed_survival_series(&mech, 1.0, &spec, &ts, method, 20_000, 11)?;
        println!("{method}");
        for e in &est {
            println!("  t = {:>3}: {:.4e} +- {:.1e}", e.horizon, e.value, e.stderr);
        }
        let series: Vec<_> = est.iter().map(|e| (e.horizon, e.value, e.stderr)).collect();
        match fit_rate(&series) {
            Ok(f) => println!("  fit: rho = {:.4}, kappa = {:.3}", f.rho_hat, f.kappa_hat),
            Err(e) => println!("  fit failed: {e}"),
        }
    }
    let p = classify(&spec, g, 1.0)?;
    println!("predicted: {} rho = {}, kappa = {}", p.label, p.exp_rate, p.poly_exponent);
    Ok(())
}
