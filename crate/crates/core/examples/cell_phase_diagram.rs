//! Cells sharing parasites at division: regimes of the mean number of
//! infected cells.
//!
//! cargo run --example cell_phase_diagram

use csbpc::cellmodel::{critical_boundary, entropy_boundary, infected_regime, phase_diagram, CellModel, ThetaLaw};
use csbpc::regimes::RegimeLabel;

fn main() -> csbpc::Result<()> {
    for g in [0.4, 1.0, 1.8] {
        let model = CellModel::new(g, 1.0, 1.0, ThetaLaw::TwoPoint { theta: 0.25 })?;
        let r = infected_regime(&model)?;
        println!("g/r = {g}: {} E[N*_t] ~ {}", r.label, r.form());
    }

    let beta_law = CellModel::new(0.5, 1.0, 1.0, ThetaLaw::Beta { a: 2.0, b: 2.0 })?;
    println!("Beta(2,2) sharing, g/r = 0.5: {}", infected_regime(&beta_law)?.label);

    println!("\ntheta  critical  entropy");
    for theta in [0.1, 0.25, 0.4, 0.5] {
        println!("{theta:<6} {:.6}  {:.6}", critical_boundary(theta), entropy_boundary(theta));
    }

    // coarse text rendering of the diagram
    let thetas: Vec<f64> = (1..=9).map(|k| 0.05 * k as f64).collect();
    let grs: Vec<f64> = (0..=20).rev().map(|k| 0.1 * k as f64).collect();
    let cells = phase_diagram(&thetas, &grs)?;
    println!();
    for &gr in &grs {
        let row: String = cells
            .iter()
            .filter(|c| c.g_over_r == gr)
            .map(|c| match c.label {
                RegimeLabel::StronglySubcritical => 's',
                RegimeLabel::IntermediateSubcritical => 'i',
                RegimeLabel::WeaklySubcritical => 'w',
                RegimeLabel::Critical => 'c',
                RegimeLabel::Supercritical => 'S',
            })
            .collect();
        println!("{gr:>4.1} {row}");
    }
    println!("     theta 0.05 .. 0.45  (s strongly, i intermediate, w weakly, c critical, S supercritical)");
    Ok(())
}
