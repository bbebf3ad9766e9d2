//! Exact Feller sampling in a random environment: quenched extinction
//! frequencies and the annealed mean.
//!
//! cargo run --release --example feller_martingale

use csbpc::env::EnvironmentSpec;
use csbpc::mechanisms::StableMechanism;
use csbpc::montecarlo::{feller_sampler_check, martingale_check};
use csbpc::rng::stream;

fn main() -> csbpc::Result<()> {
    let spec = EnvironmentSpec::with_atoms(0.1, &[(0.5, 1.0)])?;
    let mech = StableMechanism::feller(0.1, 1.0)?;

    let path = spec.sample_path(5.0, &mut stream(1, 0))?;
    let c = feller_sampler_check(&mech, 1.0, &path, 5.0, 50_000, 2)?;
    println!("P(Y_5 = 0): {:.5} +- {:.5}  closed form {:.5}", c.zero_freq, c.zero_stderr, c.zero_target);
    println!("E[Y_5 | K]: {:.5} +- {:.5}  x0 e^K {:.5}", c.mean, c.mean_stderr, c.mean_target);

    for t in [5.0, 10.0] {
        let m = martingale_check(&mech, 1.0, &spec, t, 50_000, 3)?;
        println!(
            "t = {t:>4}: E[Y_t] = {:.5} +- {:.5} (target {:.5}), E[e^-K Y_t] = {:.4} +- {:.4}",
            m.y_mean, m.y_stderr, m.y_target, m.z_mean, m.z_stderr
        );
    }
    Ok(())
}
