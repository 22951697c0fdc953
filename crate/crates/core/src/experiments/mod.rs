//! Monte Carlo studies: size and power of the rank tests, the detection-rate
//! scaling, the covariance of the estimator and the deviation bound.
//!
//! Replications use `stream(master_seed, rep)` and results are merged in
//! replication order, so every report is reproducible bit for bit.

mod clt;
mod deviation;
mod figures;
mod summary;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use clt::{mc_clt_check, CltPlan, CltReport};
pub use deviation::{mc_deviation_check, DeviationPlan, DeviationReport, DeviationRow};
pub use figures::{emit_figure_data, write_manifest, FigureKind, FigureResults, Manifest};
pub use summary::{ks_two_sample, skewness, Rate};

use crate::error::{Error, Result};
use crate::matrix::QuantileSource;
use crate::rank_test::{block_spectra, critical_value, select_block_length, BlockSpectrum, TestConfig};
use crate::simulate::{simulate_scenario, SimScenario};
use crate::spectral::SpectralWeights;

/// Version string written into manifests.
pub fn version_string() -> String {
    match option_env!("SPOTRANK_GIT_DESCRIBE") {
        Some(g) => format!("spotrank-{}-{g}", env!("CARGO_PKG_VERSION")),
        None => format!("spotrank-{}", env!("CARGO_PKG_VERSION")),
    }
}

/// A Monte Carlo plan for size and power studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McPlan {
    pub reps: usize,
    pub master_seed: u64,
    pub scenario: SimScenario,
    pub config: TestConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<std::path::PathBuf>,
}

impl McPlan {
    fn check(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        self.scenario.validate()?;
        self.config.validate(self.scenario.d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub alpha: f64,
    #[serde(flatten)]
    pub rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub reps: usize,
    pub master_seed: u64,
    pub scenario: SimScenario,
    pub config: TestConfig,
    /// Block statistics pooled over all replications (blocks × reps).
    pub pooled_blocks: usize,
    /// One row per level: block-level rates for local tests, replication-level
    /// rates for global tests.
    pub rows: Vec<SizeRow>,
    /// `λ_{r+1}(Ĉ)/ε²` per block, in replication and block order.
    #[serde(skip)]
    pub scaled_statistics: Vec<f64>,
}

fn rep_spectra(scn: &SimScenario, weights: &SpectralWeights, rep: u64, nhs: &[usize]) -> Result<Vec<Vec<BlockSpectrum>>> {
    let (_, grid) = simulate_scenario(scn, rep)?;
    nhs.iter().map(|nh| block_spectra(&grid, *nh, weights)).collect()
}

/// Rejection rates per level for the plan's scenario and test.
pub fn mc_size(plan: &McPlan, alphas: &[f64], qsrc: &QuantileSource) -> Result<SizeReport> {
    plan.check()?;
    let cfg = &plan.config;
    let weights = cfg.weights()?;
    let d = plan.scenario.d;
    let r = cfg.r();
    let configs: Vec<TestConfig> = alphas
        .iter()
        .map(|a| TestConfig { alpha: *a, ..cfg.clone() })
        .collect();
    for c in &configs {
        c.validate(d)?;
    }
    let k = plan.scenario.n / cfg.nh;
    let h = cfg.nh as f64 / plan.scenario.n as f64;
    let eps_probe = crate::spectral::local_noise_level(plan.scenario.n, h, plan.scenario.eta)?;
    // fill quantile tables before the parallel section
    for c in &configs {
        critical_value(c, &weights, d, r, h, eps_probe, k, qsrc)?;
    }
    let per_rep: Vec<(Vec<usize>, Vec<f64>)> = (0..plan.reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<(Vec<usize>, Vec<f64>)> {
            let spectra = rep_spectra(&plan.scenario, &weights, rep, &[cfg.nh])?.remove(0);
            let kk = spectra.len();
            let mut counts = vec![0usize; configs.len()];
            for (a, c) in configs.iter().enumerate() {
                let mut any = false;
                for s in &spectra {
                    let (kappa, _) = critical_value(c, &weights, d, r, s.block.h, s.eps, kk, qsrc)?;
                    let rej = s.eigenvalues[r] > kappa;
                    any |= rej;
                    if !cfg.global {
                        counts[a] += rej as usize;
                    }
                }
                if cfg.global {
                    counts[a] = any as usize;
                }
            }
            let scaled = spectra.iter().map(|s| s.eigenvalues[r] / (s.eps * s.eps)).collect();
            Ok((counts, scaled))
        })
        .collect::<Result<_>>()?;
    let pooled_blocks: usize = per_rep.iter().map(|(_, s)| s.len()).sum();
    let trials = if cfg.global { plan.reps } else { pooled_blocks };
    let rows = alphas
        .iter()
        .enumerate()
        .map(|(a, alpha)| SizeRow {
            alpha: *alpha,
            rate: Rate::new(per_rep.iter().map(|(c, _)| c[a]).sum(), trials),
        })
        .collect();
    Ok(SizeReport {
        reps: plan.reps,
        master_seed: plan.master_seed,
        scenario: plan.scenario.clone(),
        config: cfg.clone(),
        pooled_blocks,
        rows,
        scaled_statistics: per_rep.into_iter().flat_map(|(_, s)| s).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub nh: usize,
    pub lambda2_star: f64,
    #[serde(flatten)]
    pub rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub reps: usize,
    pub master_seed: u64,
    pub scenario: SimScenario,
    pub config: TestConfig,
    pub nh_grid: Vec<usize>,
    pub lambda2_grid: Vec<f64>,
    /// Row-major over `(λ₂*, nh)`.
    pub cells: Vec<PowerCell>,
}

impl PowerReport {
    pub fn cell(&self, lambda2_star: f64, nh: usize) -> Option<&PowerCell> {
        self.cells
            .iter()
            .find(|c| c.nh == nh && c.lambda2_star.to_bits() == lambda2_star.to_bits())
    }
}

/// Rejection frequencies over a grid of prescribed second eigenvalues and
/// block lengths. `λ₂* = 0` runs the rank-1 null. Each replication simulates
/// one path per `λ₂*`, shared by all block lengths; replication `rep` uses
/// the same random stream for every `λ₂*`.
///
/// With `config.global` a replication counts once; otherwise blocks are pooled.
pub fn mc_power(plan: &McPlan, lambda2_grid: &[f64], nh_grid: &[usize], qsrc: &QuantileSource) -> Result<PowerReport> {
    plan.check()?;
    if lambda2_grid.is_empty() || nh_grid.is_empty() {
        return Err(Error::Config("empty power grid".into()));
    }
    let cfg = &plan.config;
    let weights = cfg.weights()?;
    let base = &plan.scenario;
    let (d, n, r) = (base.d, base.n, cfg.r());
    for &nh in nh_grid {
        TestConfig { nh, ..cfg.clone() }.validate(d)?;
    }
    if cfg.global && cfg.variant == crate::rank_test::Variant::Sim {
        let ks: Vec<usize> = nh_grid.iter().map(|nh| n / nh).collect();
        qsrc.prefetch_lambda_m_max(d - r, &weights, &[cfg.alpha], &ks)?;
    }
    for &nh in nh_grid {
        let h = nh as f64 / n as f64;
        let eps = crate::spectral::local_noise_level(n, h, base.eta)?;
        critical_value(&TestConfig { nh, ..cfg.clone() }, &weights, d, r, h, eps, n / nh, qsrc)?;
    }
    let mut cells = Vec::with_capacity(lambda2_grid.len() * nh_grid.len());
    for &lambda in lambda2_grid {
        let mut scn = SimScenario::h0_or_h1(d, n, base.eta, lambda, plan.master_seed);
        let want = if lambda > 0.0 { base.r + 1 } else { base.r };
        if base.base_diag.len() == want {
            scn.base_diag = base.base_diag.clone();
        }
        let per_rep: Vec<Vec<usize>> = (0..plan.reps as u64)
            .into_par_iter()
            .map(|rep| -> Result<Vec<usize>> {
                let all = rep_spectra(&scn, &weights, rep, nh_grid)?;
                let mut out = Vec::with_capacity(nh_grid.len());
                for (spectra, &nh) in all.iter().zip(nh_grid) {
                    let c = TestConfig { nh, ..cfg.clone() };
                    let kk = spectra.len();
                    let mut count = 0;
                    for s in spectra {
                        let (kappa, _) = critical_value(&c, &weights, d, r, s.block.h, s.eps, kk, qsrc)?;
                        count += (s.eigenvalues[r] > kappa) as usize;
                    }
                    out.push(if cfg.global { (count > 0) as usize } else { count });
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (g, &nh) in nh_grid.iter().enumerate() {
            let trials = if cfg.global { plan.reps } else { plan.reps * (n / nh) };
            cells.push(PowerCell {
                nh,
                lambda2_star: lambda,
                rate: Rate::new(per_rep.iter().map(|c| c[g]).sum(), trials),
            });
        }
    }
    Ok(PowerReport {
        reps: plan.reps,
        master_seed: plan.master_seed,
        scenario: plan.scenario.clone(),
        config: cfg.clone(),
        nh_grid: nh_grid.to_vec(),
        lambda2_grid: lambda2_grid.to_vec(),
        cells,
    })
}

/// Plan for power along `λ₂* = R·n^{-1/3}` with block lengths from
/// [`select_block_length`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectPlan {
    pub n_list: Vec<usize>,
    #[serde(rename = "R_list")]
    pub r_list: Vec<f64>,
    /// Constant in front of the block-length rule.
    pub block_constant: f64,
    /// Exponent of `n` in `v_n = n^{-rate_exponent}`.
    pub rate_exponent: f64,
    pub d: usize,
    pub eta: f64,
    pub reps: usize,
    pub master_seed: u64,
    /// Local test; `nh` is overwritten per `n`.
    pub config: TestConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectCell {
    pub n: usize,
    pub nh: usize,
    #[serde(rename = "R")]
    pub r_factor: f64,
    pub lambda2_star: f64,
    #[serde(flatten)]
    pub rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub plan: DetectPlan,
    pub cells: Vec<DetectCell>,
}

impl DetectReport {
    pub fn cell(&self, n: usize, r_factor: f64) -> Option<&DetectCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.r_factor.to_bits() == r_factor.to_bits())
    }

    /// Whether power is nondecreasing in `R` at every `n`, allowing each
    /// step to dip by at most `slack_se` standard errors.
    pub fn increasing_in_r(&self, slack_se: f64) -> bool {
        self.plan.n_list.iter().all(|&n| {
            let row: Vec<&DetectCell> = self.cells.iter().filter(|c| c.n == n).collect();
            row.windows(2).all(|w| {
                let se = (w[0].rate.se.powi(2) + w[1].rate.se.powi(2)).sqrt();
                w[1].rate.rate + slack_se * se >= w[0].rate.rate
            })
        })
    }
}

/// Pooled block-level power of the local test at `λ₂* = R·n^{-rate_exponent}`.
pub fn detect_rate_experiment(plan: &DetectPlan, qsrc: &QuantileSource) -> Result<DetectReport> {
    let mut cells = Vec::new();
    for &n in &plan.n_list {
        let bl = select_block_length(n, &plan.config.hypothesis, plan.block_constant)?;
        let mut cfg = plan.config.clone();
        cfg.nh = bl.nh;
        cfg.global = false;
        let lambdas: Vec<f64> = plan
            .r_list
            .iter()
            .map(|r| r * (n as f64).powf(-plan.rate_exponent))
            .collect();
        let mc = McPlan {
            reps: plan.reps,
            master_seed: plan.master_seed,
            scenario: SimScenario::h0(plan.d, n, plan.eta, plan.master_seed),
            config: cfg,
            outputs: None,
        };
        let rep = mc_power(&mc, &lambdas, &[bl.nh], qsrc)?;
        for (cell, r) in rep.cells.iter().zip(&plan.r_list) {
            cells.push(DetectCell {
                n,
                nh: bl.nh,
                r_factor: *r,
                lambda2_star: cell.lambda2_star,
                rate: cell.rate,
            });
        }
    }
    Ok(DetectReport {
        plan: plan.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank_test::Variant;

    fn small_plan(global: bool) -> McPlan {
        let mut config = TestConfig::new(Variant::Sim, 0.05, 1, 40);
        config.global = global;
        McPlan {
            reps: 4,
            master_seed: 3,
            scenario: SimScenario::h0(4, 1200, 0.001, 3),
            config,
            outputs: None,
        }
    }

    fn qsrc() -> QuantileSource {
        QuantileSource::new(2).with_nsim(10_000, 10_000)
    }

    #[test]
    fn size_report_is_reproducible() {
        let plan = small_plan(false);
        let a = mc_size(&plan, &[0.1, 0.05], &qsrc()).unwrap();
        let b = mc_size(&plan, &[0.1, 0.05], &qsrc()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pooled_blocks, 4 * 30);
        assert_eq!(a.rows[0].rate.trials, 120);
        assert!(a.rows[0].rate.rejections >= a.rows[1].rate.rejections);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn power_zero_column_is_size() {
        let plan = small_plan(true);
        let q = qsrc();
        let p = mc_power(&plan, &[0.0, 0.5], &[40, 60], &q).unwrap();
        let s = mc_size(&plan, &[0.05], &q).unwrap();
        assert_eq!(p.cell(0.0, 40).unwrap().rate, s.rows[0].rate);
        assert_eq!(p.cell(0.5, 40).unwrap().rate.rate, 1.0);
        assert_eq!(p.cells.len(), 4);
    }

    #[test]
    fn detect_rate_table_shape() {
        let config = TestConfig::new(Variant::Sim, 0.05, 1, 30);
        let plan = DetectPlan {
            n_list: vec![1000, 2000],
            r_list: vec![0.0, 5.0],
            block_constant: 0.4,
            rate_exponent: 1.0 / 3.0,
            d: 3,
            eta: 0.001,
            reps: 2,
            master_seed: 1,
            config,
        };
        let rep = detect_rate_experiment(&plan, &qsrc()).unwrap();
        assert_eq!(rep.cells.len(), 4);
        assert_eq!(rep.cell(1000, 5.0).unwrap().rate.rate, 1.0);
        assert!(rep.increasing_in_r(0.0));
    }
}
