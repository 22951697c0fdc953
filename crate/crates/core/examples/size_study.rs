//! Null rejection rates of the simulated and GOE critical values, plus the
//! histogram data comparing the standardized statistic with both laws.
//!
//! `cargo run --release --example size_study`

use spotrank::experiments::{emit_figure_data, mc_size, FigureKind, FigureResults, McPlan};
use spotrank::matrix::{goe_max_eig_samples, lambda_m_samples, QuantileSource};
use spotrank::rank_test::{TestConfig, Variant};
use spotrank::simulate::SimScenario;

fn main() -> spotrank::Result<()> {
    let qsrc = QuantileSource::default();
    let alphas = [0.1, 0.05, 0.01];
    for variant in [Variant::Sim, Variant::Goe] {
        let plan = McPlan {
            reps: 10,
            master_seed: 2024,
            scenario: SimScenario::h0(10, 32_400, 0.001, 2024),
            config: TestConfig::new(variant, 0.05, 1, 50),
            outputs: None,
        };
        let rep = mc_size(&plan, &alphas, &qsrc)?;
        for row in &rep.rows {
            println!(
                "{:>4} alpha {:<4}: {:.2}% +- {:.2} ({} blocks)",
                variant.tag(),
                row.alpha,
                100.0 * row.rate.rate,
                100.0 * row.rate.se,
                row.rate.trials
            );
        }
        if variant == Variant::Sim {
            let weights = plan.config.weights()?;
            let lm = lambda_m_samples(9, &weights, 100_000, 1);
            let goe = goe_max_eig_samples(9, 100_000, 1);
            let dir = std::env::temp_dir().join("spotrank-size");
            let results = FigureResults::Fig1Left {
                size: &rep,
                weights: &weights,
                lambda_m_draws: &lm,
                goe_draws: &goe,
            };
            for f in emit_figure_data(FigureKind::Fig1Left, &results, &dir)? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}
