use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the weights `w_j ∝ M⁻¹(1 + j²/M²)⁻²` are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WeightMode {
    /// Normalized so that `Σ_{j≤J} w_j = 1`.
    FiniteRenorm,
    /// Normalized by `c_w` computed from the full series over `j ≥ 1`.
    CwInfinite,
}

impl WeightMode {
    pub fn tag(self) -> &'static str {
        match self {
            WeightMode::FiniteRenorm => "finite",
            WeightMode::CwInfinite => "cw",
        }
    }
}

/// Frequency weights for the spectral covariance estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralWeights {
    /// Mixing parameter.
    pub m: f64,
    /// Frequency cutoff.
    pub j: usize,
    pub mode: WeightMode,
    /// `w[0]` is the weight of frequency 1.
    pub w: Vec<f64>,
    pub c_w: f64,
    /// `Σ_{j≤J} w_j j²`, the noise-bias constant.
    pub b_w: f64,
    /// `‖(j² w_j)_{j≤J}‖_ℓ²`.
    pub l2_j2w: f64,
}

const TAIL_TOL: f64 = 1e-10;

#[inline]
fn profile(m: f64, j: f64) -> f64 {
    let x = 1.0 + j * j / (m * m);
    1.0 / (m * x * x)
}

/// Builds the weights for mixing parameter `m` and cutoff `j`.
pub fn make_weights(m: f64, j: usize, mode: WeightMode) -> Result<SpectralWeights> {
    if !(m >= 1.0 && m.is_finite()) {
        return Err(Error::InvalidInput(format!("mixing parameter M = {m} must be >= 1")));
    }
    if j < 1 {
        return Err(Error::InvalidInput("frequency cutoff J must be >= 1".into()));
    }
    let raw: Vec<f64> = (1..=j).map(|k| profile(m, k as f64)).collect();
    let c_w = match mode {
        WeightMode::FiniteRenorm => 1.0 / raw.iter().rev().sum::<f64>(),
        WeightMode::CwInfinite => 1.0 / series_sum(m, j),
    };
    let w: Vec<f64> = raw.iter().map(|r| c_w * r).collect();
    let (b_w, l2) = w.iter().enumerate().fold((0.0, 0.0), |(b, l2), (k, wk)| {
        let jj = ((k + 1) * (k + 1)) as f64;
        (b + wk * jj, l2 + (wk * jj) * (wk * jj))
    });
    Ok(SpectralWeights {
        m,
        j,
        mode,
        w,
        c_w,
        b_w,
        l2_j2w: l2.sqrt(),
    })
}

/// `Σ_{j≥1} M⁻¹(1+j²/M²)⁻²`, truncated where the integral tail bound
/// `M³/(3T³)` falls below `TAIL_TOL` relative to the sum.
fn series_sum(m: f64, j: usize) -> f64 {
    // the sum is at least its first term
    let lower = profile(m, 1.0);
    let t_tail = (m.powi(3) / (3.0 * TAIL_TOL * lower)).cbrt().ceil() as usize;
    let t = j.max((50.0 * m).ceil() as usize).max(t_tail);
    (1..=t).rev().map(|k| profile(m, k as f64)).sum()
}

impl SpectralWeights {
    /// `j² w_j` for `j = 1..=J`.
    pub fn j2w(&self) -> Vec<f64> {
        self.w
            .iter()
            .enumerate()
            .map(|(k, wk)| wk * ((k + 1) * (k + 1)) as f64)
            .collect()
    }

    /// `w(s) = 1 − Σ_{j≤J} w_j cos(2πjs)`.
    pub fn weight_function(&self, s: f64) -> f64 {
        let tau = 2.0 * std::f64::consts::PI * s;
        1.0 - self
            .w
            .iter()
            .enumerate()
            .map(|(k, wk)| wk * (tau * (k + 1) as f64).cos())
            .sum::<f64>()
    }
}
