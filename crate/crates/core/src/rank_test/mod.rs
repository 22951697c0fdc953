//! Local and global tests of `H₀: rank Σ ≤ r` on blocks, based on
//! `λ_{r+1}(Ĉ)` and three kinds of critical values.

mod kappa;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kappa::{
    kappa0, kappa0_with, kappa1, kappa2, kappa_global_nonasym, standardize,
    standardize_asymptotic, w_fn, Kappa0Constants,
};

use crate::error::{Error, Result};
use crate::matrix::QuantileSource;
use crate::spectral::{
    bias0, local_estimate, local_noise_level, make_weights, Block, HypothesisParams,
    ObservationGrid, SineBasis, SpectralWeights, WeightMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    /// Non-asymptotic critical value from the matrix deviation inequality.
    Nonasym,
    /// Asymptotic critical value from the GOE largest eigenvalue.
    Goe,
    /// Simulated quantile of `Λ_M`.
    Sim,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Nonasym => "nonasym",
            Variant::Goe => "goe",
            Variant::Sim => "sim",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nonasym" => Ok(Variant::Nonasym),
            "goe" => Ok(Variant::Goe),
            "sim" => Ok(Variant::Sim),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub variant: Variant,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "J")]
    pub j: usize,
    pub weights_mode: WeightMode,
    pub hypothesis: HypothesisParams,
    /// Block length in observation intervals.
    pub nh: usize,
    pub global: bool,
    pub kappa0_constants: Kappa0Constants,
}

impl TestConfig {
    /// `M = 10`, `J = 15` with weights summing to one, and `β = 1/2`,
    /// `L = 1`, `λ̲_r = 1` for the non-asymptotic variant.
    pub fn new(variant: Variant, alpha: f64, r: usize, nh: usize) -> Self {
        TestConfig {
            variant,
            alpha,
            m: 10.0,
            j: 15,
            weights_mode: WeightMode::FiniteRenorm,
            hypothesis: HypothesisParams::new(r, 0.5, 1.0, 1.0),
            nh,
            global: false,
            kappa0_constants: Kappa0Constants::default(),
        }
    }

    pub fn r(&self) -> usize {
        self.hypothesis.r
    }

    pub fn with_rank(&self, r: usize) -> Self {
        let mut c = self.clone();
        c.hypothesis.r = r;
        c
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        self.hypothesis.validate(d)?;
        let r = self.hypothesis.r as f64;
        match self.variant {
            Variant::Nonasym if self.m < r => {
                return Err(Error::Config(format!("non-asymptotic test needs M >= r, got M = {}", self.m)))
            }
            Variant::Goe | Variant::Sim if self.m < r + 1.0 => {
                return Err(Error::Config(format!("asymptotic tests need M >= r + 1, got M = {}", self.m)))
            }
            _ => {}
        }
        if self.nh < self.j {
            return Err(Error::Config(format!(
                "block of {} increments is below the minimum J = {}",
                self.nh, self.j
            )));
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<SpectralWeights> {
        make_weights(self.m, self.j, self.weights_mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub eps: f64,
    pub bias0: f64,
    #[serde(rename = "B_w")]
    pub b_w: f64,
    /// Standardized by `√((2π)⁻¹ M³) ε²`.
    pub standardized_m3_inv_2pi: f64,
    /// Standardized by `√(2π⁻¹ M³) ε²`.
    pub standardized_m3_2_over_pi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestDecision {
    /// Block number within the partition.
    pub k: usize,
    pub block: Block,
    pub r: usize,
    pub variant: Variant,
    /// `λ_{r+1}(Ĉ)`.
    pub statistic: f64,
    pub standardized: f64,
    pub kappa: f64,
    pub reject: bool,
    pub diagnostics: Diagnostics,
}

/// Eigenvalues of `Ĉ` on one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpectrum {
    pub k: usize,
    pub block: Block,
    pub eps: f64,
    /// Descending.
    pub eigenvalues: Vec<f64>,
}

/// Spectra of `Ĉ` on the regular partition into blocks of `nh` increments.
pub fn block_spectra(grid: &ObservationGrid, nh: usize, weights: &SpectralWeights) -> Result<Vec<BlockSpectrum>> {
    let blocks = Block::partition(grid.n(), nh)?;
    spectra_of(grid, &blocks, weights)
}

fn spectra_of(grid: &ObservationGrid, blocks: &[Block], weights: &SpectralWeights) -> Result<Vec<BlockSpectrum>> {
    let n = grid.n();
    let basis = SineBasis::new(n, &blocks[0], weights.j)?;
    blocks
        .par_iter()
        .enumerate()
        .map(|(k, block)| {
            let stats = if basis.fits(n, block) {
                basis.project(grid, block)
            } else {
                SineBasis::new(n, block, weights.j)?.project(grid, block)
            };
            let eps = local_noise_level(n, block.h, grid.eta())?;
            let est = local_estimate(&stats, weights, eps)?;
            Ok(BlockSpectrum {
                k,
                block: *block,
                eps,
                eigenvalues: est.eigenvalues_c,
            })
        })
        .collect()
}

/// Critical value for rank `r` on a block of length `h` with noise level
/// `eps`. With `global`, the level is shared across `k_blocks` blocks.
///
/// Returns `(κ, bias0)`; bias0 is reported for every variant but only enters
/// the non-asymptotic one.
#[allow(clippy::too_many_arguments)]
pub fn critical_value(
    cfg: &TestConfig,
    weights: &SpectralWeights,
    d: usize,
    r: usize,
    h: f64,
    eps: f64,
    k_blocks: usize,
    qsrc: &QuantileSource,
) -> Result<(f64, f64)> {
    let mut hyp = cfg.hypothesis;
    hyp.r = r;
    let b0 = bias0(&hyp, h);
    let kappa = match (cfg.variant, cfg.global) {
        (Variant::Nonasym, false) => kappa0_with(cfg.alpha, cfg.m, d, r, b0, eps, cfg.kappa0_constants)?,
        (Variant::Nonasym, true) => {
            kappa_global_nonasym(cfg.alpha, h, cfg.m, d, r, b0, eps, cfg.kappa0_constants)?
        }
        (Variant::Goe, global) => {
            let level = if global { cfg.alpha / k_blocks as f64 } else { cfg.alpha };
            kappa1(weights, eps, qsrc.goe(d - r, level)?)
        }
        (Variant::Sim, false) => kappa2(qsrc.lambda_m(d - r, weights, cfg.alpha)?, eps),
        (Variant::Sim, true) => kappa2(qsrc.lambda_m_max(d - r, weights, cfg.alpha, k_blocks)?, eps),
    };
    Ok((kappa, b0))
}

/// Decision for rank `r` from a block spectrum and its critical value.
pub fn decide(spec: &BlockSpectrum, r: usize, variant: Variant, weights: &SpectralWeights, kappa: f64, bias0: f64) -> TestDecision {
    let statistic = spec.eigenvalues[r];
    let eps = spec.eps;
    TestDecision {
        k: spec.k,
        block: spec.block,
        r,
        variant,
        statistic,
        standardized: standardize(statistic, weights, eps),
        kappa,
        reject: statistic > kappa,
        diagnostics: Diagnostics {
            eps,
            bias0,
            b_w: weights.b_w,
            standardized_m3_inv_2pi: standardize_asymptotic(statistic, weights, eps, 1.0 / (2.0 * std::f64::consts::PI)),
            standardized_m3_2_over_pi: standardize_asymptotic(statistic, weights, eps, 2.0 / std::f64::consts::PI),
        },
    }
}

/// Test of `rank ≤ r` on a single block. `cfg.global` and `cfg.nh` are ignored.
pub fn local_test(grid: &ObservationGrid, block: &Block, cfg: &TestConfig, qsrc: &QuantileSource) -> Result<TestDecision> {
    let d = grid.d();
    let mut local = cfg.clone();
    local.global = false;
    local.nh = block.increments();
    local.validate(d)?;
    let weights = cfg.weights()?;
    let spec = spectra_of(grid, std::slice::from_ref(block), &weights)?.remove(0);
    let (kappa, b0) = critical_value(&local, &weights, d, cfg.r(), block.h, spec.eps, 1, qsrc)?;
    let mut dec = decide(&spec, cfg.r(), cfg.variant, &weights, kappa, b0);
    dec.k = 0;
    Ok(dec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalTestResult {
    pub decisions: Vec<TestDecision>,
    pub reject: bool,
    /// Largest per-block critical value (all blocks share one when the
    /// partition is regular).
    pub kappa_g: f64,
    #[serde(rename = "K")]
    pub k: usize,
    /// Increments after the last full block, not tested.
    pub dropped_increments: usize,
}

/// Tests every block of the partition into `cfg.nh`-increment blocks. With
/// `cfg.global`, critical values control the level over the whole session
/// and the global decision rejects if any block does.
pub fn global_test(grid: &ObservationGrid, cfg: &TestConfig, qsrc: &QuantileSource) -> Result<GlobalTestResult> {
    let d = grid.d();
    cfg.validate(d)?;
    let weights = cfg.weights()?;
    let spectra = block_spectra(grid, cfg.nh, &weights)?;
    let k = spectra.len();
    let mut decisions = Vec::with_capacity(k);
    let mut kappa_g = 0.0f64;
    for spec in &spectra {
        let (kappa, b0) = critical_value(cfg, &weights, d, cfg.r(), spec.block.h, spec.eps, k, qsrc)?;
        kappa_g = kappa_g.max(kappa);
        decisions.push(decide(spec, cfg.r(), cfg.variant, &weights, kappa, b0));
    }
    Ok(GlobalTestResult {
        reject: decisions.iter().any(|x| x.reject),
        decisions,
        kappa_g,
        k,
        dropped_increments: grid.n() - k * cfg.nh,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockLength {
    /// Unrounded `c · max(...)`.
    pub h_raw: f64,
    pub nh: usize,
    pub h: f64,
    /// Number of full blocks.
    #[serde(rename = "K")]
    pub k: usize,
}

/// `h = c · max((λ̲⁻¹L²n)^{−1/(2β+2)}, (Ln)^{−1/(β+2)})`, the first branch
/// dropped when `λ̲ = 0`, then rounded down so that `nh` is an integer.
pub fn select_block_length(n: usize, params: &HypothesisParams, c: f64) -> Result<BlockLength> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Config(format!("block-length constant {c} must be positive")));
    }
    let (nf, b, l) = (n as f64, params.beta, params.l);
    let second = (l * nf).powf(-1.0 / (b + 2.0));
    let first = if params.lambda_gap > 0.0 {
        (l * l * nf / params.lambda_gap).powf(-1.0 / (2.0 * b + 2.0))
    } else {
        0.0
    };
    let h_raw = c * first.max(second);
    let nh = ((h_raw * nf + 1e-9).floor() as usize).clamp(1, n);
    Ok(BlockLength {
        h_raw,
        nh,
        h: nh as f64 / nf,
        k: n / nh,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFraction {
    pub rank: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankScan {
    pub nh: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub r_max: usize,
    /// Smallest accepted rank per block; `d` when every `r ≤ r_max` is rejected.
    pub ranks: Vec<usize>,
    /// Share of blocks per reported rank `1..=d`.
    pub fractions: Vec<RankFraction>,
}

/// Smallest `r ∈ 1..=r_max` whose test accepts, block by block.
pub fn rank_scan(grid: &ObservationGrid, cfg: &TestConfig, r_max: usize, qsrc: &QuantileSource) -> Result<RankScan> {
    let d = grid.d();
    if r_max == 0 || r_max >= d {
        return Err(Error::Config(format!("r_max = {r_max} outside 1..={}", d - 1)));
    }
    for r in 1..=r_max {
        cfg.with_rank(r).validate(d)?;
    }
    let weights = cfg.weights()?;
    let spectra = block_spectra(grid, cfg.nh, &weights)?;
    let k = spectra.len();
    let mut ranks = Vec::with_capacity(k);
    for spec in &spectra {
        let mut found = d;
        for r in 1..=r_max {
            let (kappa, _) = critical_value(cfg, &weights, d, r, spec.block.h, spec.eps, k, qsrc)?;
            if spec.eigenvalues[r] <= kappa {
                found = r;
                break;
            }
        }
        ranks.push(found);
    }
    let fractions = (1..=d)
        .map(|rank| RankFraction {
            rank,
            fraction: ranks.iter().filter(|x| **x == rank).count() as f64 / k as f64,
        })
        .collect();
    Ok(RankScan {
        nh: cfg.nh,
        k,
        r_max,
        ranks,
        fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::QuantileSource;

    fn qsrc() -> QuantileSource {
        QuantileSource::new(11).with_nsim(10_000, 10_000)
    }

    fn flat_grid(n: usize, d: usize) -> ObservationGrid {
        ObservationGrid::new(d, vec![0.25; (n + 1) * d], 0.0, None, "flat").unwrap()
    }

    #[test]
    fn constant_path_never_rejects() {
        let g = flat_grid(200, 3);
        for v in [Variant::Nonasym, Variant::Goe, Variant::Sim] {
            let cfg = TestConfig::new(v, 0.05, 1, 50);
            let block = Block::new(0.0, 0.25, 200).unwrap();
            let dec = local_test(&g, &block, &cfg, &qsrc()).unwrap();
            assert_eq!(dec.statistic, 0.0);
            assert!(!dec.reject);
            assert!(dec.kappa >= 0.0);
        }
    }

    #[test]
    fn global_single_block_matches_local() {
        let scn = crate::simulate::SimScenario::h1(4, 400, 0.01, 0.05, 3);
        let (_, g) = crate::simulate::simulate_scenario(&scn, 0).unwrap();
        let q = qsrc();
        for v in [Variant::Nonasym, Variant::Sim] {
            let mut cfg = TestConfig::new(v, 0.05, 1, 400);
            cfg.global = true;
            let glob = global_test(&g, &cfg, &q).unwrap();
            assert_eq!(glob.k, 1);
            let loc = local_test(&g, &Block::new(0.0, 1.0, 400).unwrap(), &cfg, &q).unwrap();
            assert_eq!(glob.decisions[0].kappa.to_bits(), loc.kappa.to_bits());
            assert_eq!(glob.decisions[0].statistic.to_bits(), loc.statistic.to_bits());
            assert_eq!(glob.reject, loc.reject);
        }
    }

    #[test]
    fn global_dominates_local_kappa() {
        let scn = crate::simulate::SimScenario::pure_noise(3, 600, 0.01, 1);
        let (_, g) = crate::simulate::simulate_scenario(&scn, 0).unwrap();
        let q = qsrc();
        for v in [Variant::Nonasym, Variant::Sim, Variant::Goe] {
            let mut cfg = TestConfig::new(v, 0.05, 1, 60);
            let loc = global_test(&g, &cfg, &q).unwrap();
            cfg.global = true;
            let glob = global_test(&g, &cfg, &q).unwrap();
            assert_eq!(glob.k, 10);
            assert!(glob.kappa_g > loc.kappa_g);
        }
    }

    #[test]
    fn decisions_follow_threshold() {
        let scn = crate::simulate::SimScenario::h1(4, 1200, 0.01, 0.01, 5);
        let (_, g) = crate::simulate::simulate_scenario(&scn, 0).unwrap();
        let cfg = TestConfig::new(Variant::Sim, 0.1, 1, 40);
        let res = global_test(&g, &cfg, &qsrc()).unwrap();
        for d in &res.decisions {
            assert_eq!(d.reject, d.statistic > d.kappa);
        }
        assert_eq!(res.reject, res.decisions.iter().any(|d| d.reject));
    }

    #[test]
    fn block_length_exponents() {
        let p = HypothesisParams::new(1, 0.5, 1.0, 1.0);
        let a = select_block_length(1000, &p, 1.0).unwrap();
        let b = select_block_length(8000, &p, 1.0).unwrap();
        assert!((b.h_raw / a.h_raw - 0.5).abs() < 1e-12);
        let free = HypothesisParams::new(1, 0.5, 1.0, 0.0);
        let a = select_block_length(1000, &free, 1.0).unwrap();
        let b = select_block_length(32_000, &free, 1.0).unwrap();
        assert!((b.h_raw / a.h_raw - 32f64.powf(-0.4)).abs() < 1e-12);
        assert_eq!(b.nh, (b.h_raw * 32_000.0).floor() as usize);
    }

    #[test]
    fn block_length_at_full_session_scale() {
        let p = HypothesisParams::new(1, 0.5, 1.0, 1.0);
        let bl = select_block_length(32_400, &p, 0.045).unwrap();
        assert!((30..=60).contains(&bl.nh), "nh = {}", bl.nh);
        assert_eq!(bl.k, 32_400 / bl.nh);
    }

    #[test]
    fn rank_scan_detects_strong_second_factor() {
        let scn = crate::simulate::SimScenario::h1(4, 20_000, 0.001, 0.3, 8);
        let (_, g) = crate::simulate::simulate_scenario(&scn, 0).unwrap();
        let cfg = TestConfig::new(Variant::Sim, 0.05, 1, 40);
        let scan = rank_scan(&g, &cfg, 3, &qsrc()).unwrap();
        assert_eq!(scan.k, 500);
        let share2 = scan.fractions[1].fraction;
        assert!(share2 > 0.8, "{:?}", scan.fractions);
        let total: f64 = scan.fractions.iter().map(|f| f.fraction).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let g = flat_grid(200, 3);
        let mut cfg = TestConfig::new(Variant::Sim, 0.05, 3, 50);
        assert!(global_test(&g, &cfg, &qsrc()).is_err());
        cfg.hypothesis.r = 1;
        cfg.nh = 10;
        assert!(matches!(global_test(&g, &cfg, &qsrc()), Err(Error::Config(_))));
        cfg.nh = 50;
        cfg.m = 1.5;
        assert!(global_test(&g, &cfg, &qsrc()).is_err());
    }
}
