//! Power of the whole-session test over a grid of second eigenvalues and
//! block lengths.
//!
//! `cargo run --release --example power_study`

use spotrank::experiments::{emit_figure_data, mc_power, FigureKind, FigureResults, McPlan};
use spotrank::matrix::QuantileSource;
use spotrank::rank_test::{TestConfig, Variant};
use spotrank::simulate::SimScenario;

fn main() -> spotrank::Result<()> {
    let mut config = TestConfig::new(Variant::Sim, 0.05, 1, 40);
    config.global = true;
    let plan = McPlan {
        reps: 20,
        master_seed: 77,
        scenario: SimScenario::h0(10, 32_400, 0.001, 77),
        config,
        outputs: None,
    };
    let lambdas = [0.0, 0.001, 0.0025, 0.005, 0.01];
    let nhs = [25, 40, 60];
    let rep = mc_power(&plan, &lambdas, &nhs, &QuantileSource::default())?;
    print!("{:>10}", "lambda2*");
    nhs.iter().for_each(|nh| print!("{:>10}", format!("nh={nh}")));
    println!();
    for l in lambdas {
        print!("{l:>10}");
        for nh in nhs {
            print!("{:>10.3}", rep.cell(l, nh).expect("cell on the grid").rate.rate);
        }
        println!();
    }
    let dir = std::env::temp_dir().join("spotrank-power");
    emit_figure_data(FigureKind::Fig1Right, &FigureResults::Fig1Right { power: &rep }, &dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
