//! Loads a model from TOML and runs it through the library directly.
//!
//! cargo run --example config_file -- fixtures/weak.toml

use csbpc::config::ModelConfig;
use csbpc::regimes::classify;

const INLINE: &str = r#"
x0 = 1.0
[mechanism]
kind = "stable"
g = 0.5
c_plus = 1.0
beta = 1.0
[environment]
atoms = [{ m = 0.5, rate = 1.0 }]
"#;

fn main() -> csbpc::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(p) => std::fs::read_to_string(&p).map_err(|e| csbpc::Error::Config(format!("{p}: {e}")))?,
        None => INLINE.to_string(),
    };
    let model = ModelConfig::parse(&text)?.resolve()?;
    let r = classify(&model.spec, model.mechanism.growth(), model.beta())?;
    println!("{} rate={} kappa={}", r.label, r.exp_rate, r.poly_exponent);
    if let Some(tau) = r.tau {
        println!("tau = {tau}");
    }
    Ok(())
}
