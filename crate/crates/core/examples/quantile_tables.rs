//! Monte Carlo critical values: GOE largest eigenvalue, `Λ_M` and its
//! maximum over K blocks, with an on-disk cache.
//!
//! `cargo run --release --example quantile_tables`

use spotrank::matrix::{goe_max_eig_quantiles, QuantileCache, QuantileSource};
use spotrank::spectral::{make_weights, WeightMode};

fn main() -> spotrank::Result<()> {
    let goe1 = goe_max_eig_quantiles(1, &[0.05], 1_000_000, 1)?;
    println!("GOE(1) 95% quantile: {:.4} (sqrt(2) z_0.95 = 2.3262)", goe1.entries[0].q);

    let weights = make_weights(10.0, 15, WeightMode::FiniteRenorm)?;
    let cache = QuantileCache::new(std::env::temp_dir().join("spotrank-quantiles"));
    let qsrc = QuantileSource::default().with_cache(cache);
    for alpha in [0.1, 0.05, 0.01] {
        println!(
            "alpha {alpha:<4}: GOE(9) {:.3}  Lambda_M {:.2}  max of 720 {:.2}",
            qsrc.goe(9, alpha)?,
            qsrc.lambda_m(9, &weights, alpha)?,
            qsrc.lambda_m_max(9, &weights, alpha, 720)?
        );
    }
    Ok(())
}
