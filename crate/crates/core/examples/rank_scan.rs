//! Rank fractions per block length on a day whose two factors rotate:
//! short blocks see rank two, the whole session sees more.
//!
//! `cargo run --release --example rank_scan`

use spotrank::experiments::{emit_figure_data, FigureKind, FigureResults};
use spotrank::matrix::QuantileSource;
use spotrank::rank_test::{rank_scan, TestConfig, Variant};
use spotrank::simulate::{simulate_scenario, SimScenario};

fn main() -> spotrank::Result<()> {
    let scn = SimScenario::rotating(6, 32_400, 0.001, 5);
    let (_, grid) = simulate_scenario(&scn, 0)?;
    let qsrc = QuantileSource::default();
    let mut scans = Vec::new();
    for nh in [60, 600, 32_400] {
        let cfg = TestConfig::new(Variant::Sim, 0.05, 1, nh);
        let scan = rank_scan(&grid, &cfg, 5, &qsrc)?;
        let line: Vec<String> = scan
            .fractions
            .iter()
            .map(|f| format!("r={}: {:.2}", f.rank, f.fraction))
            .collect();
        println!("nh = {nh:>5} (K = {:>3}): {}", scan.k, line.join("  "));
        scans.push(scan);
    }
    let dir = std::env::temp_dir().join("spotrank-rank-scan");
    let files = emit_figure_data(FigureKind::Table1Style, &FigureResults::Table1Style { scans: &scans }, &dir)?;
    println!("wrote {}", files[0].display());
    Ok(())
}
