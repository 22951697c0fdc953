//! Tail of `λmax(Σ Γ_j Γ_jᵀ)` against the closed-form deviation bound, for
//! the variances of the pure-noise spectral statistics.
//!
//! `cargo run --release --example deviation_bound`

use spotrank::experiments::{mc_deviation_check, DeviationPlan};
use spotrank::matrix::default_delta_grid;
use spotrank::spectral::{make_weights, WeightMode};

fn main() -> spotrank::Result<()> {
    let w = make_weights(10.0, 15, WeightMode::FiniteRenorm)?;
    let eps2 = 0.01;
    let plan = DeviationPlan {
        s: w.j2w().iter().map(|x| x * eps2).collect(),
        dim: 9,
        alphas: vec![0.1, 0.05, 0.01],
        reps: 100_000,
        master_seed: 3,
        delta_grid: default_delta_grid(),
    };
    for row in mc_deviation_check(&plan)?.rows {
        println!(
            "alpha {:<4}: bound {:.4}, exceedance {:.5} +- {:.5}",
            row.alpha, row.bound, row.exceed.rate, row.exceed.se
        );
    }
    Ok(())
}
