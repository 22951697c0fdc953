use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PowerReport, SizeReport};
use crate::error::{Error, Result};
use crate::matrix::empirical_quantile_sorted;
use crate::rank_test::RankScan;
use crate::spectral::SpectralWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FigureKind {
    /// Null histogram of the standardized statistic against the simulated
    /// and GOE laws.
    Fig1Left,
    /// Power curves over `λ₂*` per block length.
    Fig1Right,
    /// Fraction of blocks per scanned rank.
    Table1Style,
}

pub enum FigureResults<'a> {
    Fig1Left {
        size: &'a SizeReport,
        weights: &'a SpectralWeights,
        /// Draws of `Λ_M` in dimension `d − r`.
        lambda_m_draws: &'a [f64],
        /// Draws of `λmax(GOE(d − r))`.
        goe_draws: &'a [f64],
    },
    Fig1Right {
        power: &'a PowerReport,
    },
    Table1Style {
        scans: &'a [RankScan],
    },
}

const BINS: usize = 60;

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn histogram(x: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let width = (hi - lo) / BINS as f64;
    let mut counts = vec![0usize; BINS];
    for v in x {
        if *v >= lo && *v < hi {
            counts[(((v - lo) / width) as usize).min(BINS - 1)] += 1;
        }
    }
    counts
        .iter()
        .map(|c| *c as f64 / (x.len() as f64 * width))
        .collect()
}

fn sorted(mut x: Vec<f64>) -> Vec<f64> {
    x.sort_by(f64::total_cmp);
    x
}

/// Writes plot-ready CSV files plus a gnuplot script into `dir`.
///
/// * `FIG1_LEFT`: `fig1_left_hist.csv` with header
///   `standardization,bin_left,bin_right,h0_density,sim_density,goe_density`
///   and `fig1_left_quantiles.csv` with header
///   `standardization,alpha,h0_quantile,sim_quantile,goe_quantile`. The
///   standardizations are `exact` (finite-J norm of `j²w_j`), `inv_2pi`
///   (`(2π)⁻¹M³`) and `2_over_pi` (`2π⁻¹M³`).
/// * `FIG1_RIGHT`: `fig1_right_power.csv` with header
///   `nh,lambda2_star,rejections,trials,rate,se`.
/// * `TABLE1_STYLE`: `table1_ranks.csv` with header `nh,K,rank,fraction`.
pub fn emit_figure_data(kind: FigureKind, results: &FigureResults<'_>, dir: &Path) -> Result<Vec<PathBuf>> {
    io(dir, fs::create_dir_all(dir))?;
    match (kind, results) {
        (
            FigureKind::Fig1Left,
            FigureResults::Fig1Left {
                size,
                weights,
                lambda_m_draws,
                goe_draws,
            },
        ) => fig1_left(size, weights, lambda_m_draws, goe_draws, dir),
        (FigureKind::Fig1Right, FigureResults::Fig1Right { power }) => fig1_right(power, dir),
        (FigureKind::Table1Style, FigureResults::Table1Style { scans }) => table1(scans, dir),
        _ => Err(Error::InvalidInput(format!("results do not match figure kind {kind:?}"))),
    }
}

fn fig1_left(size: &SizeReport, w: &SpectralWeights, lm: &[f64], goe: &[f64], dir: &Path) -> Result<Vec<PathBuf>> {
    if size.scaled_statistics.is_empty() || lm.is_empty() || goe.is_empty() {
        return Err(Error::InvalidInput("figure needs non-empty samples".into()));
    }
    let m3 = w.m.powi(3);
    let scalings: [(&str, f64); 3] = [
        ("exact", w.l2_j2w),
        ("inv_2pi", (m3 / (2.0 * std::f64::consts::PI)).sqrt()),
        ("2_over_pi", (2.0 * m3 / std::f64::consts::PI).sqrt()),
    ];
    let goe = sorted(goe.to_vec());
    let hist_path = dir.join("fig1_left_hist.csv");
    let q_path = dir.join("fig1_left_quantiles.csv");
    let mut hist = csv::Writer::from_path(&hist_path)?;
    let mut quant = csv::Writer::from_path(&q_path)?;
    hist.write_record(["standardization", "bin_left", "bin_right", "h0_density", "sim_density", "goe_density"])?;
    quant.write_record(["standardization", "alpha", "h0_quantile", "sim_quantile", "goe_quantile"])?;
    for (name, scale) in scalings {
        let h0 = sorted(size.scaled_statistics.iter().map(|x| (x - w.b_w) / scale).collect());
        let sim = sorted(lm.iter().map(|x| (x - w.b_w) / scale).collect());
        let lo = h0[0].min(sim[0]).min(goe[0]);
        let hi = h0[h0.len() - 1].max(sim[sim.len() - 1]).max(goe[goe.len() - 1]);
        let hi = hi + (hi - lo) * 1e-9;
        let width = (hi - lo) / BINS as f64;
        let (a, b, c) = (histogram(&h0, lo, hi), histogram(&sim, lo, hi), histogram(&goe, lo, hi));
        for i in 0..BINS {
            let left = lo + i as f64 * width;
            hist.write_record([
                name.to_string(),
                left.to_string(),
                (left + width).to_string(),
                a[i].to_string(),
                b[i].to_string(),
                c[i].to_string(),
            ])?;
        }
        for alpha in [0.1, 0.05, 0.01] {
            quant.write_record([
                name.to_string(),
                alpha.to_string(),
                empirical_quantile_sorted(&h0, 1.0 - alpha).to_string(),
                empirical_quantile_sorted(&sim, 1.0 - alpha).to_string(),
                empirical_quantile_sorted(&goe, 1.0 - alpha).to_string(),
            ])?;
        }
    }
    hist.flush().map_err(|e| Error::io(&hist_path, e))?;
    quant.flush().map_err(|e| Error::io(&q_path, e))?;
    let gp = dir.join("fig1_left.gp");
    io(
        &gp,
        fs::write(
            &gp,
            "set datafile separator ','\nset key top right\nset xlabel 'standardized statistic'\n\
             plot 'fig1_left_hist.csv' every ::1 using ($1 eq 'exact' ? ($2+$3)/2 : 1/0):4 with boxes title 'H0', \\\n\
             '' every ::1 using ($1 eq 'exact' ? ($2+$3)/2 : 1/0):5 with lines title 'SIM', \\\n\
             '' every ::1 using ($1 eq 'exact' ? ($2+$3)/2 : 1/0):6 with lines title 'GOE'\n",
        ),
    )?;
    Ok(vec![hist_path, q_path, gp])
}

fn fig1_right(power: &PowerReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let path = dir.join("fig1_right_power.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["nh", "lambda2_star", "rejections", "trials", "rate", "se"])?;
    for c in &power.cells {
        w.write_record([
            c.nh.to_string(),
            c.lambda2_star.to_string(),
            c.rate.rejections.to_string(),
            c.rate.trials.to_string(),
            c.rate.rate.to_string(),
            c.rate.se.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let gp = dir.join("fig1_right.gp");
    let mut script = String::from(
        "set datafile separator ','\nset key bottom right\nset xlabel 'lambda2*'\nset ylabel 'rejection rate'\nplot ",
    );
    let curves: Vec<String> = power
        .nh_grid
        .iter()
        .map(|nh| format!("'fig1_right_power.csv' every ::1 using ($1=={nh} ? $2 : 1/0):5 with linespoints title 'nh={nh}'"))
        .collect();
    script.push_str(&curves.join(", \\\n     "));
    script.push('\n');
    io(&gp, fs::write(&gp, script))?;
    Ok(vec![path, gp])
}

fn table1(scans: &[RankScan], dir: &Path) -> Result<Vec<PathBuf>> {
    let path = dir.join("table1_ranks.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["nh", "K", "rank", "fraction"])?;
    for s in scans {
        for f in &s.fractions {
            w.write_record([s.nh.to_string(), s.k.to_string(), f.rank.to_string(), f.fraction.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(vec![path])
}

/// Provenance document written next to experiment outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: String,
    pub plan: serde_json::Value,
    pub seeds: Vec<u64>,
    pub runtime_secs: f64,
    pub version: String,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    io(dir, fs::create_dir_all(dir))?;
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(manifest)?;
    io(&path, fs::write(&path, body + "\n"))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank_test::RankFraction;

    #[test]
    fn table_shape() {
        let dir = tempfile::tempdir().unwrap();
        let scans = vec![RankScan {
            nh: 60,
            k: 2,
            r_max: 2,
            ranks: vec![1, 2],
            fractions: vec![
                RankFraction { rank: 1, fraction: 0.5 },
                RankFraction { rank: 2, fraction: 0.5 },
                RankFraction { rank: 3, fraction: 0.0 },
            ],
        }];
        let files = emit_figure_data(FigureKind::Table1Style, &FigureResults::Table1Style { scans: &scans }, dir.path()).unwrap();
        let text = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text, "nh,K,rank,fraction\n60,2,1,0.5\n60,2,2,0.5\n60,2,3,0\n");
        let wrong = emit_figure_data(FigureKind::Fig1Right, &FigureResults::Table1Style { scans: &scans }, dir.path());
        assert!(wrong.is_err());
    }

    #[test]
    fn histogram_integrates_to_one() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let h = histogram(&x, 0.0, 1.0 + 1e-9);
        let width = (1.0 + 1e-9) / BINS as f64;
        assert!((h.iter().sum::<f64>() * width - 1.0).abs() < 1e-9);
    }
}
