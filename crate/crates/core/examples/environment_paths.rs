//! Samples a catastrophe environment and evaluates its Laplace exponent.
//!
//! cargo run --example environment_paths

use csbpc::env::{Atom, Component, EnvironmentSpec, MultiplierLaw};
use csbpc::rng::stream;

fn main() -> csbpc::Result<()> {
    // halving at rate 1, plus Beta(2, 5) survivors' fractions at rate 0.5
    let spec = EnvironmentSpec::new(
        0.1,
        vec![Atom::new(0.5, 1.0)],
        vec![Component {
            rate: 0.5,
            law: MultiplierLaw::Beta { a: 2.0, b: 5.0 },
        }],
    )?;
    println!("total rate {}", spec.total_rate());
    for lam in [0.0, 0.5, 1.0, 2.0] {
        println!("phi_K({lam}) = {:.6}   phi_K'({lam}) = {:.6}", spec.phi_k(lam)?, spec.phi_k_prime(lam)?);
    }

    let path = spec.sample_path(10.0, &mut stream(42, 0))?;
    println!("\n{} jumps on [0, 10]", path.jump_count());
    for t in [1.0, 2.5, 5.0, 10.0] {
        println!("K_{t} = {:+.6}", path.k_at(t)?);
    }
    println!("int_0^10 e^(-K) = {:.6}", path.exp_functional(1.0, 10.0)?);

    // the Esscher-tilted law used by the importance sampler
    let tilted = spec.esscher(1.0)?;
    println!("\ntilted total rate {:.6}, drift {}", tilted.total_rate(), tilted.drift());

    print!("\n{}", path.to_csv());
    Ok(())
}
