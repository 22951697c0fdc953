use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs to the maximal-eigenvalue deviation bound for
/// `λmax(Σ_j Γ_j Γ_jᵀ)` with independent `Γ_j ~ N(0, s_j I_d)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationBoundInputs {
    pub s: Vec<f64>,
    pub dim: usize,
    pub alpha: f64,
    pub delta_grid: Vec<f64>,
}

/// 41 log-spaced points from 1e-2 to 1e2.
pub fn default_delta_grid() -> Vec<f64> {
    (0..41).map(|k| 10f64.powf(-2.0 + 0.1 * k as f64)).collect()
}

/// Evaluates, for each `δ` in the grid,
///
/// ```text
/// (1+δ)‖s‖₁ + (1+δ) log(√(7e/2) d) max(√(d+1)‖s‖₂, (d+1)‖s‖∞) + 2(1+1/δ) log(1/α) ‖s‖∞
/// ```
///
/// and returns the smallest value.
pub fn deviation_bound(inputs: &DeviationBoundInputs) -> Result<f64> {
    let DeviationBoundInputs {
        s,
        dim,
        alpha,
        delta_grid,
    } = inputs;
    if delta_grid.is_empty() {
        return Err(Error::InvalidInput("empty δ grid".into()));
    }
    if delta_grid.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidInput("δ values must be positive and finite".into()));
    }
    if s.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidInput("s must be finite and nonnegative".into()));
    }
    if *dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if !(*alpha > 0.0 && *alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} outside (0, 1)")));
    }
    let l1: f64 = s.iter().sum();
    let l2 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let linf = s.iter().copied().fold(0.0, f64::max);
    let d = *dim as f64;
    let log_term = ((7.0 * std::f64::consts::E / 2.0).sqrt() * d).ln();
    let spread = ((d + 1.0).sqrt() * l2).max((d + 1.0) * linf);
    let tail = 2.0 * (1.0 / alpha).ln() * linf;
    Ok(delta_grid
        .iter()
        .map(|&delta| (1.0 + delta) * (l1 + log_term * spread) + (1.0 + 1.0 / delta) * tail)
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sequence_arithmetic() {
        let b = deviation_bound(&DeviationBoundInputs {
            s: vec![1.0],
            dim: 1,
            alpha: (-1.0f64).exp(),
            delta_grid: vec![1.0],
        })
        .unwrap();
        let expected = 2.0 + 4.0 * (7.0 * std::f64::consts::E / 2.0).sqrt().ln() + 4.0;
        assert!((b - expected).abs() < 1e-12, "{b} vs {expected}");
    }

    #[test]
    fn zero_sequence() {
        let b = deviation_bound(&DeviationBoundInputs {
            s: vec![0.0; 5],
            dim: 3,
            alpha: 0.05,
            delta_grid: default_delta_grid(),
        })
        .unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn empty_grid_rejected() {
        let r = deviation_bound(&DeviationBoundInputs {
            s: vec![1.0],
            dim: 1,
            alpha: 0.1,
            delta_grid: vec![],
        });
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn refining_grid_never_increases() {
        let base = DeviationBoundInputs {
            s: vec![0.5, 0.3, 0.1],
            dim: 4,
            alpha: 0.05,
            delta_grid: vec![1.0, 10.0],
        };
        let coarse = deviation_bound(&base).unwrap();
        let mut fine = base.clone();
        fine.delta_grid.extend(default_delta_grid());
        assert!(deviation_bound(&fine).unwrap() <= coarse);
    }
}
