//! Whole-session test under the null and under an alternative with a
//! second eigenvalue.
//!
//! `cargo run --release --example global_test`

use spotrank::matrix::QuantileSource;
use spotrank::rank_test::{global_test, TestConfig, Variant};
use spotrank::simulate::{simulate_scenario, SimScenario};

fn main() -> spotrank::Result<()> {
    let qsrc = QuantileSource::default();
    let mut cfg = TestConfig::new(Variant::Sim, 0.05, 1, 40);
    cfg.global = true;
    for lambda2 in [0.0, 0.02, 0.1] {
        let scn = SimScenario::h0_or_h1(10, 32_400, 0.001, lambda2, 11);
        let (_, grid) = simulate_scenario(&scn, 0)?;
        let res = global_test(&grid, &cfg, &qsrc)?;
        println!(
            "lambda2* = {lambda2:<5}: K = {}, kappa_g = {:.3e}, blocks rejecting = {}, global reject = {}",
            res.k,
            res.kappa_g,
            res.decisions.iter().filter(|d| d.reject).count(),
            res.reject
        );
    }
    Ok(())
}
