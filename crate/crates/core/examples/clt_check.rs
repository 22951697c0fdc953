//! Empirical covariance of the block estimator against its exact value
//! for constant `Σ = I₂`.
//!
//! `cargo run --release --example clt_check`

use spotrank::experiments::{mc_clt_check, CltPlan};

fn main() -> spotrank::Result<()> {
    for m in [10.0, 50.0] {
        let plan = CltPlan::identity(2, m, 2 * m as usize, 2_000, 0.05, 20_000, 9);
        let rep = mc_clt_check(&plan)?;
        println!(
            "M = {m:>3}: relative Frobenius error {:.3}, max |z| {:.2}, skewness of diagonal {:?}",
            rep.rel_frobenius_error,
            rep.max_abs_z,
            rep.diag_skewness.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>()
        );
    }
    Ok(())
}
