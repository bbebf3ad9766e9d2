//! Supercritical growth: log Y_t is asymptotically Gaussian on survival.
//!
//! cargo run --release --example supercritical_clt

use csbpc::env::EnvironmentSpec;
use csbpc::mechanisms::StableMechanism;
use csbpc::montecarlo::{clt_check, w_limit_estimate};

fn main() -> csbpc::Result<()> {
    let spec = EnvironmentSpec::with_atoms(1.2, &[(0.5, 1.0)])?;
    let mech = StableMechanism::feller(1.2, 1.0)?;

    let r = clt_check(&mech, 1.0, &spec, 100.0, 4_000, 5)?;
    println!("survivors {} of 4000", r.survivors);
    println!("centering {:.6}, scale {:.6}", r.centering, r.scale);
    println!("KS distance to N(0,1): {:.4}", r.ks);

    let w = w_limit_estimate(&mech, 1.0, &spec, 50.0, 4_000, 6)?;
    println!(
        "\nP(Y_50 > 0) = {:.4} +- {:.4}, environment average {:.4}",
        w.survival_freq, w.survival_stderr, w.survival_closed_form
    );
    println!("E[W] ~ {:.4} +- {:.4}", w.mean_w, w.mean_w_stderr);
    Ok(())
}
