//! Classifies the extinction regime as the drift g increases.
//!
//! cargo run --example regimes

use csbpc::env::EnvironmentSpec;
use csbpc::regimes::{classify, find_tau};

fn main() -> csbpc::Result<()> {
    let spec = EnvironmentSpec::with_atoms(0.0, &[(0.5, 1.0)])?;
    let ln2 = std::f64::consts::LN_2;
    println!("{:>8}  {:<24} {:>12} {:>6}", "g", "regime", "rate", "kappa");
    for g in [0.1, ln2 / 2.0, 0.5, ln2, 1.2] {
        let r = classify(&spec, g, 1.0)?;
        println!("{g:>8.4}  {:<24} {:>12.6} {:>6}", r.label.as_str(), r.exp_rate, r.poly_exponent);
    }
    println!("\ntau at g = 0.5: {:.9}", find_tau(&spec, 0.5)?);

    // stable branching with beta = 1/2 moves the boundaries
    let r = classify(&spec, 0.2, 0.5)?;
    println!("beta = 1/2, g = 0.2: {} rate {:.6}", r.label, r.exp_rate);
    Ok(())
}
