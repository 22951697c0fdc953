//! Block-wise spot covariance estimation from one simulated day.
//!
//! `cargo run --release --example spectral_estimator`

use spotrank::rank_test::select_block_length;
use spotrank::simulate::{simulate_scenario, SimScenario};
use spotrank::spectral::{
    local_estimate, local_noise_level, make_weights, riemann_noise_factor, spectral_stats, Block, HypothesisParams,
    WeightMode,
};

fn main() -> spotrank::Result<()> {
    let (n, eta) = (32_400, 0.001);
    let scn = SimScenario::h0(4, n, eta, 42);
    let (path, grid) = simulate_scenario(&scn, 0)?;
    let weights = make_weights(10.0, 15, WeightMode::FiniteRenorm)?;
    println!("B_w = {:.4}, ||j^2 w||_2 = {:.4}", weights.b_w, weights.l2_j2w);

    let bl = select_block_length(n, &HypothesisParams::new(1, 0.5, 1.0, 1.0), 0.0744)?;
    println!("rate rule: nh = {}, K = {}", bl.nh, bl.k);

    for k in [0, bl.k / 2, bl.k - 1] {
        let block = Block::new(k as f64 * bl.h, bl.h, n)?;
        let eps = local_noise_level(n, bl.h, eta)?;
        let est = local_estimate(&spectral_stats(&grid, &block, weights.j)?, &weights, eps)?;
        let mid = (block.start_index + block.end_index) / 2;
        println!(
            "block {k:>3}: eps = {eps:.5}, lambda(C) = {:?}",
            est.eigenvalues_c.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()
        );
        println!(
            "           Sigma_hat[0,0] = {:.4}, true Sigma[0,0] = {:.4}",
            est.sigma_hat.get(0, 0),
            path.sigma(mid).get(0, 0)
        );
    }
    println!(
        "noise variance factor of the midpoint sums at j = 15, nh = {}: {:.4}",
        bl.nh,
        riemann_noise_factor(15, bl.nh)
    );
    Ok(())
}
