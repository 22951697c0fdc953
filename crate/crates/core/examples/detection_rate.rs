//! Power along `λ₂* = R n^{-1/3}` with blocks shrinking like `n^{-1/3}`.
//!
//! `cargo run --release --example detection_rate`

use spotrank::experiments::{detect_rate_experiment, DetectPlan};
use spotrank::matrix::QuantileSource;
use spotrank::rank_test::{TestConfig, Variant};

fn main() -> spotrank::Result<()> {
    let plan = DetectPlan {
        n_list: vec![8_100, 32_400],
        r_list: vec![0.1, 0.2, 0.3],
        block_constant: 0.0744,
        rate_exponent: 1.0 / 3.0,
        d: 10,
        eta: 0.001,
        reps: 20,
        master_seed: 8,
        config: TestConfig::new(Variant::Sim, 0.05, 1, 30),
    };
    let rep = detect_rate_experiment(&plan, &QuantileSource::default())?;
    for c in &rep.cells {
        println!(
            "n = {:>6}, nh = {:>3}, R = {:<4} lambda2* = {:.5}: power {:.3} +- {:.3}",
            c.n, c.nh, c.r_factor, c.lambda2_star, c.rate.rate, c.rate.se
        );
    }
    println!("increasing in R at each n: {}", rep.increasing_in_r(2.0));
    Ok(())
}
