use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ObservationGrid;

/// Per-coordinate noise level estimates from the increments of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    /// `√max(0, −(n−1)⁻¹ Σ ΔY_i ΔY_{i+1})`.
    pub eta_primary: Vec<f64>,
    /// `√((2n)⁻¹ Σ ΔY_i²)`.
    pub eta_fallback: Vec<f64>,
    /// Primary estimate, or the fallback where the primary is zero.
    pub eta_hat: Vec<f64>,
    pub fallback_used: Vec<bool>,
    /// Root mean square of `eta_hat`.
    pub pooled: f64,
    /// Lag-one autocorrelation of the increments.
    pub lag1_autocorr: Vec<f64>,
}

pub fn estimate_noise(grid: &ObservationGrid) -> Result<NoiseEstimate> {
    let n = grid.n();
    if n < 10 {
        return Err(Error::InvalidInput(format!("noise estimation needs n >= 10, got {n}")));
    }
    let d = grid.d();
    let mut out = NoiseEstimate {
        eta_primary: Vec::with_capacity(d),
        eta_fallback: Vec::with_capacity(d),
        eta_hat: Vec::with_capacity(d),
        fallback_used: Vec::with_capacity(d),
        pooled: 0.0,
        lag1_autocorr: Vec::with_capacity(d),
    };
    for k in 0..d {
        let dy = grid.increments(k);
        let sq: f64 = dy.iter().map(|x| x * x).sum();
        let cross: f64 = dy.windows(2).map(|p| p[0] * p[1]).sum();
        let primary = (-cross / (n - 1) as f64).max(0.0).sqrt();
        let fallback = (sq / (2 * n) as f64).sqrt();
        let use_fb = primary == 0.0;
        out.eta_primary.push(primary);
        out.eta_fallback.push(fallback);
        out.eta_hat.push(if use_fb { fallback } else { primary });
        out.fallback_used.push(use_fb);

        let mean = dy.iter().sum::<f64>() / n as f64;
        let var: f64 = dy.iter().map(|x| (x - mean).powi(2)).sum();
        let cov: f64 = dy.windows(2).map(|p| (p[0] - mean) * (p[1] - mean)).sum();
        out.lag1_autocorr.push(if var > 0.0 { cov / var } else { 0.0 });
    }
    out.pooled = (out.eta_hat.iter().map(|e| e * e).sum::<f64>() / d as f64).sqrt();
    Ok(out)
}
