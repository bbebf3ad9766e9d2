//! Backward ODE for general branching mechanisms, checked against the
//! stable closed form and bracketed by its Feller sandwich.
//!
//! cargo run --example ode_solver

use csbpc::env::EnvironmentSpec;
use csbpc::mechanisms::{GeneralMechanism, Mechanism, ReproductionAtom, StableMechanism};
use csbpc::quenched_ode::{default_ladder, solve_backward, survival_general, survival_sandwich, DEFAULT_TOLERANCE};
use csbpc::quenched_stable::quenched_laplace;
use csbpc::rng::stream;

fn main() -> csbpc::Result<()> {
    let spec = EnvironmentSpec::with_atoms(0.1, &[(0.5, 1.0)])?;
    let path = spec.sample_path(5.0, &mut stream(3, 0))?;

    let stable = StableMechanism::new(0.1, 1.0, 0.5)?;
    let mech = Mechanism::from(stable);
    for lam in [0.1, 1.0, 10.0] {
        let sol = solve_backward(&mech, lam, 5.0, &path, DEFAULT_TOLERANCE)?;
        let exact = -quenched_laplace(&stable, 1.0, lam, 5.0, &path)?.ln();
        println!(
            "lambda {lam:>4}: v(0) = {:.12}  closed form {:.12}  rel err {:.1e}  ({} steps)",
            sol.v0,
            exact,
            (sol.v0 - exact).abs() / exact,
            sol.stats.accepted
        );
    }

    let general = GeneralMechanism::new(0.1, 1.0, vec![ReproductionAtom { z: 1.0, rate: 1.0 }], None)?;
    let mech = Mechanism::from(general.clone());
    let bracket = survival_general(&mech, 1.0, 5.0, &path, &default_ladder(), DEFAULT_TOLERANCE)?;
    let (lo, hi) = survival_sandwich(&general, 1.0, 5.0, &path)?;
    println!("\ngeneral mechanism, t = 5");
    println!("  survival in [{:.8}, {:.8}]", bracket.lower, bracket.upper);
    println!("  Feller sandwich [{lo:.8}, {hi:.8}]");
    Ok(())
}
