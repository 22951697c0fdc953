//! Writes synthetic quote files for three instruments, synchronizes them on
//! a one-second grid and estimates the noise level.
//!
//! `cargo run --release --example ingest_ticks`

use std::fmt::Write as _;
use std::fs;

use rand::Rng;
use rand_distr::StandardNormal;
use spotrank::io::{ingest, write_grid, IngestOptions};

fn main() -> spotrank::Result<()> {
    let dir = std::env::temp_dir().join("spotrank-ticks");
    fs::create_dir_all(&dir).expect("temp dir");
    let day = 19_724i64 * 86_400_000;
    let open = day + 8 * 3_600_000;
    let mut rng = spotrank::rng::seeded(4);
    let mut files = Vec::new();
    for (sym, level) in [("BUND", 131.2), ("BOBL", 117.9), ("SCHATZ", 105.4)] {
        let mut body = String::from("timestamp_ms,symbol,bid,ask\n");
        let (mut t, mut x) = (open - 5_000, level);
        while t <= open + 9 * 3_600_000 {
            let dt: f64 = rng.random_range(200.0..3_000.0);
            t += dt as i64;
            x += 0.002 * (dt / 1000.0).sqrt() * rng.sample::<f64, _>(StandardNormal);
            let mid = x + 0.001 * rng.sample::<f64, _>(StandardNormal);
            writeln!(body, "{t},{sym},{:.5},{:.5}", mid - 0.005, mid + 0.005).unwrap();
        }
        let path = dir.join(format!("{sym}.csv"));
        fs::write(&path, body).expect("write ticks");
        files.push(path);
    }
    let opts = IngestOptions {
        session: "08:00-17:00".parse()?,
        grid_seconds: 1.0,
        log: false,
    };
    let report = ingest(&files, &opts)?;
    println!("symbols {:?}, n = {}", report.symbols, report.n);
    if let Some(noise) = &report.noise {
        println!("eta_hat {:?}, pooled {:.5}", noise.eta_hat, noise.pooled);
        println!("lag-1 autocorrelation {:?}", noise.lag1_autocorr);
    }
    write_grid(report.grid.as_ref().expect("grid"), &dir.join("grid"))?;
    println!("grid written to {}", dir.join("grid").display());
    Ok(())
}
