//! Survival of a stable branching process along one fixed environment.
//!
//! cargo run --example quenched_survival

use csbpc::env::EnvironmentSpec;
use csbpc::mechanisms::StableMechanism;
use csbpc::quenched_stable::{absorption_limit, quenched_laplace, quenched_result};
use csbpc::rng::stream;

fn main() -> csbpc::Result<()> {
    let spec = EnvironmentSpec::with_atoms(0.1, &[(0.5, 1.0)])?;
    let path = spec.sample_path(20.0, &mut stream(7, 0))?;

    for beta in [0.5, 1.0] {
        let mech = StableMechanism::new(0.1, 1.0, beta)?;
        println!("beta = {beta}");
        for t in [1.0, 5.0, 20.0] {
            let r = quenched_result(&mech, 1.0, t, &path)?;
            println!(
                "  t = {t:>4}: P(Y_t > 0) = {:.6e}   J = {:.6e}   E[exp(-Y_t)] = {:.6}",
                r.survival_prob,
                r.functional_j,
                quenched_laplace(&mech, 1.0, 1.0, t, &path)?
            );
        }
    }

    // supercritical drift: eventual absorption has probability < 1
    let spec = EnvironmentSpec::with_atoms(1.2, &[(0.5, 1.0)])?;
    let path = spec.sample_path(50.0, &mut stream(7, 1))?;
    let mech = StableMechanism::feller(1.2, 1.0)?;
    let a = absorption_limit(&mech, 1.0, &path)?;
    println!("\nsupercritical path: P(absorbed by 50) = {:.6}, tail bound {:?}", a.probability, a.tail_bound);
    Ok(())
}
