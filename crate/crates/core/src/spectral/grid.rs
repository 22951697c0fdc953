use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metadata stored next to an observation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n: usize,
    pub d: usize,
    /// Noise standard deviation, known (simulation) or estimated (ingest).
    pub eta: f64,
    pub seed: Option<u64>,
    pub scenario: String,
}

/// Observations `Y_0, …, Y_n ∈ ℝ^d` at times `i/n` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGrid {
    d: usize,
    /// Row-major `(n+1) × d`.
    values: Vec<f64>,
    pub meta: GridMeta,
}

impl ObservationGrid {
    /// `values` holds `n + 1` rows of length `d`, row-major.
    pub fn new(d: usize, values: Vec<f64>, eta: f64, seed: Option<u64>, scenario: &str) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension d must be at least 1".into()));
        }
        if values.len() % d != 0 {
            return Err(Error::InvalidInput(format!(
                "{} values do not form rows of length {d}",
                values.len()
            )));
        }
        let rows = values.len() / d;
        if rows < 3 {
            return Err(Error::InvalidInput(format!(
                "need n >= 2 intervals, got {}",
                rows.saturating_sub(1)
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite observation at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidInput(format!("noise level eta = {eta} must be >= 0")));
        }
        Ok(ObservationGrid {
            d,
            values,
            meta: GridMeta {
                n: rows - 1,
                d,
                eta,
                seed,
                scenario: scenario.to_string(),
            },
        })
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.meta.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn eta(&self) -> f64 {
        self.meta.eta
    }

    /// `Y_i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Y_i − Y_{i−1}` for coordinate `k`, `1 ≤ i ≤ n`.
    #[inline]
    pub fn increment(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.d + k] - self.values[(i - 1) * self.d + k]
    }

    /// Column `k` of all increments, `ΔY_1, …, ΔY_n`.
    pub fn increments(&self, k: usize) -> Vec<f64> {
        (1..=self.n()).map(|i| self.increment(i, k)).collect()
    }
}

/// A block `[t, t + h]` and the increments whose midpoints `(i − ½)/n` fall in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub t: f64,
    pub h: f64,
    /// First increment index `i` (1-based).
    pub start_index: usize,
    /// Last increment index, inclusive.
    pub end_index: usize,
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

impl Block {
    pub fn new(t: f64, h: f64, n: usize) -> Result<Block> {
        if !(0.0..1.0).contains(&t) || !(h > 0.0) || t + h > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "block [{t}, {}] is not inside [0, 1]",
                t + h
            )));
        }
        let nf = n as f64;
        let start = snap(t * nf + 0.5).ceil().max(1.0) as usize;
        let end = (snap((t + h) * nf + 0.5).floor() as usize).min(n);
        Ok(Block {
            t,
            h,
            start_index: start,
            end_index: end,
        })
    }

    /// Number of increments inside the block.
    pub fn increments(&self) -> usize {
        (self.end_index + 1).saturating_sub(self.start_index)
    }

    /// Consecutive blocks of `nh` increments each; a trailing partial block
    /// is dropped.
    pub fn partition(n: usize, nh: usize) -> Result<Vec<Block>> {
        if nh == 0 || nh > n {
            return Err(Error::Config(format!(
                "block length of {nh} observations does not fit n = {n}"
            )));
        }
        let k = n / nh;
        let h = nh as f64 / n as f64;
        Ok((0..k)
            .map(|b| Block {
                t: (b * nh) as f64 / n as f64,
                h,
                start_index: b * nh + 1,
                end_index: (b + 1) * nh,
            })
            .collect())
    }
}
