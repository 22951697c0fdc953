//! Monte Carlo quantiles of the null laws used for critical values.
//!
//! Three statistics are tabulated:
//!
//! - `GOE_MAX_EIG`: `λmax(GOE(dim))`;
//! - `LAMBDA_M`: `Λ_M = λmax(Σ_{j≤J} w_j j² ζ_j ζ_jᵀ)` with `ζ_j ~ N(0, I_dim)`;
//! - `LAMBDA_M_MAX_K`: the maximum of `K` independent copies of `Λ_M`.
//!
//! Replication `i` always draws from `rng::stream(seed, i)`. Because of that,
//! the first `K` copies of `Λ_M` in replication `i` are the same whatever the
//! total number drawn, and tables for several `K` can share one pass
//! ([`lambda_m_max_quantiles_multi`]) without changing a single bit.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::goe::sample_goe;
use super::sym::lambda_max_raw;
use crate::error::{Error, Result};
use crate::rng;
use crate::spectral::{SpectralWeights, WeightMode};

pub const MIN_NSIM: usize = 10_000;
pub const DEFAULT_NSIM: usize = 200_000;
/// Replications for max-of-K tables, each of which costs `K` draws.
pub const DEFAULT_NSIM_MAX: usize = 10_000;
pub const DEFAULT_QUANTILE_SEED: u64 = 20_240_501;

/// Levels always tabulated alongside any requested one.
pub const STANDARD_ALPHAS: [f64; 8] = [0.5, 0.2, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StatisticKind {
    GoeMaxEig,
    LambdaM,
    LambdaMMaxK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEntry {
    pub alpha: f64,
    pub q: f64,
}

/// A set of `(1 − α)`-quantiles from one Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub statistic_kind: StatisticKind,
    pub dim: usize,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<usize>,
    pub weights_mode: Option<WeightMode>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub nsim: usize,
    pub seed: u64,
    pub entries: Vec<QuantileEntry>,
}

impl QuantileTable {
    pub fn quantile(&self, alpha: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.alpha.to_bits() == alpha.to_bits())
            .map(|e| e.q)
    }

    /// File stem identifying every parameter except the levels.
    pub fn key(&self) -> String {
        table_key(
            self.statistic_kind,
            self.dim,
            self.m.zip(self.j).zip(self.weights_mode),
            self.k,
            self.nsim,
            self.seed,
        )
    }
}

fn table_key(
    kind: StatisticKind,
    dim: usize,
    weights: Option<((f64, usize), WeightMode)>,
    k: Option<usize>,
    nsim: usize,
    seed: u64,
) -> String {
    let kind = match kind {
        StatisticKind::GoeMaxEig => "goe",
        StatisticKind::LambdaM => "lambda_m",
        StatisticKind::LambdaMMaxK => "lambda_m_max",
    };
    let mut key = format!("{kind}_d{dim}");
    if let Some(((m, j), mode)) = weights {
        key.push_str(&format!("_M{m}_J{j}_{}", mode.tag()));
    }
    if let Some(k) = k {
        key.push_str(&format!("_K{k}"));
    }
    key.push_str(&format!("_n{nsim}_s{seed}"));
    key
}

/// Empirical `p`-quantile of ascending-sorted data: the `⌈p n⌉`-th order statistic.
pub fn empirical_quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "empty sample");
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn check_levels(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("no levels requested".into()));
    }
    match alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        Some(a) => Err(Error::InvalidInput(format!("level {a} outside (0, 1)"))),
        None => Ok(()),
    }
}

fn check_nsim(nsim: usize) -> Result<()> {
    if nsim < MIN_NSIM {
        Err(Error::TooFewSimulations {
            nsim,
            min: MIN_NSIM,
        })
    } else {
        Ok(())
    }
}

fn entries_from(mut draws: Vec<f64>, alphas: &[f64]) -> Vec<QuantileEntry> {
    draws.sort_by(f64::total_cmp);
    alphas
        .iter()
        .map(|&alpha| QuantileEntry {
            alpha,
            q: empirical_quantile_sorted(&draws, 1.0 - alpha),
        })
        .collect()
}

/// `λmax(Σ_j c_j ζ_j ζ_jᵀ)` for given draws; `zetas` holds `ζ_1, ζ_2, …`
/// back to back, each of length `dim`.
pub fn lambda_m_from_draws(dim: usize, coeffs: &[f64], zetas: &[f64]) -> f64 {
    assert_eq!(zetas.len(), dim * coeffs.len(), "need one ζ per coefficient");
    if dim == 1 {
        return coeffs.iter().zip(zetas).map(|(c, z)| c * z * z).sum();
    }
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for (c, z) in coeffs.iter().zip(zetas.chunks_exact(dim)) {
        for a in 0..dim {
            let ca = c * z[a];
            for b in a..dim {
                m[(b, a)] += ca * z[b];
            }
        }
    }
    // the eigensolver reads the lower triangle
    lambda_max_raw(m)
}

/// Reusable `Λ_M` sampler for one `(dim, weights)` pair.
#[derive(Debug, Clone)]
pub struct LambdaMSampler {
    dim: usize,
    coeffs: Vec<f64>,
    zetas: Vec<f64>,
}

impl LambdaMSampler {
    pub fn new(dim: usize, weights: &SpectralWeights) -> Self {
        Self::from_coeffs(dim, weights.j2w())
    }

    /// Sampler for `λmax(Σ_j c_j ζ_j ζ_jᵀ)` with arbitrary nonnegative `c_j`.
    pub fn from_coeffs(dim: usize, coeffs: Vec<f64>) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        let zetas = vec![0.0; dim * coeffs.len()];
        LambdaMSampler { dim, coeffs, zetas }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        for z in self.zetas.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        lambda_m_from_draws(self.dim, &self.coeffs, &self.zetas)
    }
}

/// One draw of `Λ_M` in dimension `dim_reduced = d − r`.
pub fn sample_lambda_m<R: Rng + ?Sized>(
    dim_reduced: usize,
    weights: &SpectralWeights,
    rng: &mut R,
) -> f64 {
    LambdaMSampler::new(dim_reduced, weights).sample(rng)
}

/// Runs `nsim` replications `f(i, rng_i)` with per-replication streams.
fn replicate<T: Send>(nsim: usize, seed: u64, f: impl Fn(&mut rng::SimRng) -> T + Sync) -> Vec<T> {
    (0..nsim as u64)
        .into_par_iter()
        .map(|i| f(&mut rng::stream(seed, i)))
        .collect()
}

/// Raw draws of `λmax(GOE(dim))`.
pub fn goe_max_eig_samples(dim: usize, nsim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 1, "dimension must be at least 1");
    replicate(nsim, seed, |r| {
        lambda_max_raw(sample_goe(dim, r).into_inner())
    })
}

/// Raw draws of `Λ_M`.
pub fn lambda_m_samples(dim: usize, weights: &SpectralWeights, nsim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 1, "dimension must be at least 1");
    let proto = LambdaMSampler::new(dim, weights);
    replicate(nsim, seed, |r| proto.clone().sample(r))
}

pub fn goe_max_eig_quantiles(
    dim: usize,
    alphas: &[f64],
    nsim: usize,
    seed: u64,
) -> Result<QuantileTable> {
    check_dim(dim)?;
    check_levels(alphas)?;
    check_nsim(nsim)?;
    Ok(QuantileTable {
        statistic_kind: StatisticKind::GoeMaxEig,
        dim,
        m: None,
        j: None,
        weights_mode: None,
        k: None,
        nsim,
        seed,
        entries: entries_from(goe_max_eig_samples(dim, nsim, seed), alphas),
    })
}

/// Empirical `(1 − α)`-quantile of `λmax(GOE(dim))` over `nsim` draws.
pub fn goe_max_eig_quantile(dim: usize, alpha: f64, nsim: usize, seed: u64) -> Result<f64> {
    Ok(goe_max_eig_quantiles(dim, &[alpha], nsim, seed)?.entries[0].q)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidInput("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn lambda_table(
    kind: StatisticKind,
    dim: usize,
    weights: &SpectralWeights,
    k: Option<usize>,
    nsim: usize,
    seed: u64,
    entries: Vec<QuantileEntry>,
) -> QuantileTable {
    QuantileTable {
        statistic_kind: kind,
        dim,
        m: Some(weights.m),
        j: Some(weights.j),
        weights_mode: Some(weights.mode),
        k,
        nsim,
        seed,
        entries,
    }
}

pub fn lambda_m_quantiles(
    dim: usize,
    weights: &SpectralWeights,
    alphas: &[f64],
    nsim: usize,
    seed: u64,
) -> Result<QuantileTable> {
    check_dim(dim)?;
    check_levels(alphas)?;
    check_nsim(nsim)?;
    let entries = entries_from(lambda_m_samples(dim, weights, nsim, seed), alphas);
    Ok(lambda_table(StatisticKind::LambdaM, dim, weights, None, nsim, seed, entries))
}

pub fn lambda_m_quantile(
    dim: usize,
    weights: &SpectralWeights,
    alpha: f64,
    nsim: usize,
    seed: u64,
) -> Result<f64> {
    Ok(lambda_m_quantiles(dim, weights, &[alpha], nsim, seed)?.entries[0].q)
}

/// Tables of `max(Λ_{M,1}, …, Λ_{M,K})` for several `K` from shared draws.
/// Each replication draws `max(ks)` copies and records the running maximum.
pub fn lambda_m_max_quantiles_multi(
    dim: usize,
    weights: &SpectralWeights,
    alphas: &[f64],
    ks: &[usize],
    nsim: usize,
    seed: u64,
) -> Result<Vec<QuantileTable>> {
    check_dim(dim)?;
    check_levels(alphas)?;
    check_nsim(nsim)?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidInput("block counts K must be >= 1".into()));
    }
    let k_max = *ks.iter().max().unwrap();
    let proto = LambdaMSampler::new(dim, weights);
    let rows: Vec<Vec<f64>> = replicate(nsim, seed, |r| {
        let mut sampler = proto.clone();
        let mut out = vec![0.0; ks.len()];
        let mut running = f64::NEG_INFINITY;
        for draw in 1..=k_max {
            running = running.max(sampler.sample(r));
            for (slot, &k) in out.iter_mut().zip(ks) {
                if k == draw {
                    *slot = running;
                }
            }
        }
        out
    });
    Ok(ks
        .iter()
        .enumerate()
        .map(|(col, &k)| {
            let draws = rows.iter().map(|row| row[col]).collect();
            lambda_table(
                StatisticKind::LambdaMMaxK,
                dim,
                weights,
                Some(k),
                nsim,
                seed,
                entries_from(draws, alphas),
            )
        })
        .collect())
}

pub fn lambda_m_max_quantiles(
    dim: usize,
    weights: &SpectralWeights,
    alphas: &[f64],
    k: usize,
    nsim: usize,
    seed: u64,
) -> Result<QuantileTable> {
    Ok(lambda_m_max_quantiles_multi(dim, weights, alphas, &[k], nsim, seed)?.remove(0))
}

pub fn lambda_m_max_quantile(
    dim: usize,
    weights: &SpectralWeights,
    alpha: f64,
    k: usize,
    nsim: usize,
    seed: u64,
) -> Result<f64> {
    Ok(lambda_m_max_quantiles(dim, weights, &[alpha], k, nsim, seed)?.entries[0].q)
}

/// Directory of quantile tables stored as JSON, one file per parameter set.
#[derive(Debug, Clone)]
pub struct QuantileCache {
    dir: PathBuf,
}

impl QuantileCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        QuantileCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for_key(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Result<Option<QuantileTable>> {
        let path = self.path_for_key(key);
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Writes through a temporary file and a rename, so readers never see a
    /// partial table. Tables are deterministic, so racing writers agree.
    pub fn store(&self, table: &QuantileTable) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for_key(&table.key());
        let tmp = self.dir.join(format!(
            ".{}.{}.tmp",
            table.key(),
            std::process::id()
        ));
        let bytes = serde_json::to_vec_pretty(table)?;
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Memoizing provider of null quantiles, optionally backed by a
/// [`QuantileCache`]. Missing levels trigger a recomputation over the union
/// of levels; since draws depend only on the key, existing entries are
/// reproduced exactly.
#[derive(Debug)]
pub struct QuantileSource {
    pub nsim: usize,
    pub nsim_max: usize,
    pub seed: u64,
    cache: Option<QuantileCache>,
    memo: Mutex<HashMap<String, QuantileTable>>,
}

impl Default for QuantileSource {
    fn default() -> Self {
        Self::new(DEFAULT_QUANTILE_SEED)
    }
}

impl QuantileSource {
    pub fn new(seed: u64) -> Self {
        QuantileSource {
            nsim: DEFAULT_NSIM,
            nsim_max: DEFAULT_NSIM_MAX,
            seed,
            cache: None,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_nsim(mut self, nsim: usize, nsim_max: usize) -> Self {
        self.nsim = nsim;
        self.nsim_max = nsim_max;
        self
    }

    pub fn with_cache(mut self, cache: QuantileCache) -> Self {
        self.cache = Some(cache);
        self
    }

    fn lookup(
        &self,
        key: String,
        alpha: f64,
        compute: impl FnOnce(&[f64]) -> Result<QuantileTable>,
    ) -> Result<f64> {
        if let Some(q) = self.memo.lock().unwrap().get(&key).and_then(|t| t.quantile(alpha)) {
            return Ok(q);
        }
        let mut alphas: Vec<f64> = STANDARD_ALPHAS.to_vec();
        if let Some(cache) = &self.cache {
            if let Some(table) = cache.load(&key)? {
                if let Some(q) = table.quantile(alpha) {
                    self.memo.lock().unwrap().insert(key, table);
                    return Ok(q);
                }
                alphas.extend(table.entries.iter().map(|e| e.alpha));
            }
        }
        if let Some(t) = self.memo.lock().unwrap().get(&key) {
            alphas.extend(t.entries.iter().map(|e| e.alpha));
        }
        alphas.push(alpha);
        alphas.sort_by(|a, b| b.total_cmp(a));
        alphas.dedup_by(|a, b| a.to_bits() == b.to_bits());
        let table = compute(&alphas)?;
        if let Some(cache) = &self.cache {
            cache.store(&table)?;
        }
        let q = table.quantile(alpha).expect("requested level was tabulated");
        self.memo.lock().unwrap().insert(key, table);
        Ok(q)
    }

    pub fn goe(&self, dim: usize, alpha: f64) -> Result<f64> {
        let key = table_key(StatisticKind::GoeMaxEig, dim, None, None, self.nsim, self.seed);
        self.lookup(key, alpha, |a| goe_max_eig_quantiles(dim, a, self.nsim, self.seed))
    }

    pub fn lambda_m(&self, dim: usize, weights: &SpectralWeights, alpha: f64) -> Result<f64> {
        let key = table_key(
            StatisticKind::LambdaM,
            dim,
            Some(((weights.m, weights.j), weights.mode)),
            None,
            self.nsim,
            self.seed,
        );
        self.lookup(key, alpha, |a| {
            lambda_m_quantiles(dim, weights, a, self.nsim, self.seed)
        })
    }

    pub fn lambda_m_max(
        &self,
        dim: usize,
        weights: &SpectralWeights,
        alpha: f64,
        k: usize,
    ) -> Result<f64> {
        let key = self.max_key(dim, weights, k);
        self.lookup(key, alpha, |a| {
            lambda_m_max_quantiles(dim, weights, a, k, self.nsim_max, self.seed)
        })
    }

    fn max_key(&self, dim: usize, weights: &SpectralWeights, k: usize) -> String {
        table_key(
            StatisticKind::LambdaMMaxK,
            dim,
            Some(((weights.m, weights.j), weights.mode)),
            Some(k),
            self.nsim_max,
            self.seed,
        )
    }

    /// Fills max-of-K tables for several `K` in one shared pass; produces the
    /// same tables as computing each `K` separately.
    pub fn prefetch_lambda_m_max(
        &self,
        dim: usize,
        weights: &SpectralWeights,
        alphas: &[f64],
        ks: &[usize],
    ) -> Result<()> {
        let mut levels: Vec<f64> = STANDARD_ALPHAS.iter().chain(alphas).copied().collect();
        levels.sort_by(|a, b| b.total_cmp(a));
        levels.dedup_by(|a, b| a.to_bits() == b.to_bits());
        let mut missing = Vec::new();
        for &k in ks {
            let key = self.max_key(dim, weights, k);
            let have = |t: &QuantileTable| levels.iter().all(|a| t.quantile(*a).is_some());
            if self.memo.lock().unwrap().get(&key).is_some_and(have) {
                continue;
            }
            if let Some(cache) = &self.cache {
                if let Some(t) = cache.load(&key)? {
                    if have(&t) {
                        self.memo.lock().unwrap().insert(key, t);
                        continue;
                    }
                }
            }
            missing.push(k);
        }
        missing.sort_unstable();
        missing.dedup();
        if missing.is_empty() {
            return Ok(());
        }
        let tables =
            lambda_m_max_quantiles_multi(dim, weights, &levels, &missing, self.nsim_max, self.seed)?;
        for t in tables {
            if let Some(cache) = &self.cache {
                cache.store(&t)?;
            }
            self.memo.lock().unwrap().insert(t.key(), t);
        }
        Ok(())
    }
}
