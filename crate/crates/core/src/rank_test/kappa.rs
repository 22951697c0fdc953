use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralWeights;

/// The numerical constants of the non-asymptotic critical value, which are
/// not optimized and can be overridden.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa0Constants {
    /// Multiplier of `log(2/α) / M`.
    pub c_level: f64,
    /// Multiplier of `d / M` inside `𝒲`.
    pub c_dim: f64,
}

impl Default for Kappa0Constants {
    fn default() -> Self {
        Kappa0Constants {
            c_level: 21.0,
            c_dim: 6.0,
        }
    }
}

/// `𝒲(x) = max(x, √x)`.
pub fn w_fn(x: f64) -> f64 {
    x.max(x.sqrt())
}

fn kappa0_core(log_term: f64, m: f64, d: usize, r: usize, bias0: f64, eps: f64, c: Kappa0Constants) -> Result<f64> {
    if d <= r {
        return Err(Error::Config(format!("rank r = {r} must be below d = {d}")));
    }
    if !(m >= 1.0) {
        return Err(Error::Config(format!("M = {m} must be >= 1")));
    }
    let lead = 4.0 * bias0 + eps * eps * m * m / 2.0;
    let factor = 1.0 + (4.0 * (d - r) as f64).ln() * w_fn(c.c_dim * d as f64 / m) + c.c_level * log_term / m;
    Ok(lead * factor)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha = {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Non-asymptotic critical value
/// `(4·bias0 + ε²M²/2)(1 + log(4(d−r))·𝒲(6d/M) + 21·log(2/α)/M)`.
pub fn kappa0(alpha: f64, m: f64, d: usize, r: usize, bias0: f64, eps: f64) -> Result<f64> {
    kappa0_with(alpha, m, d, r, bias0, eps, Kappa0Constants::default())
}

pub fn kappa0_with(
    alpha: f64,
    m: f64,
    d: usize,
    r: usize,
    bias0: f64,
    eps: f64,
    constants: Kappa0Constants,
) -> Result<f64> {
    check_alpha(alpha)?;
    kappa0_core((2.0 / alpha).ln(), m, d, r, bias0, eps, constants)
}

/// Per-block critical value of the non-asymptotic global test over `1/h`
/// blocks: `log(2/α)` becomes `log(2/(αh))`.
#[allow(clippy::too_many_arguments)]
pub fn kappa_global_nonasym(
    alpha: f64,
    h: f64,
    m: f64,
    d: usize,
    r: usize,
    bias0: f64,
    eps: f64,
    constants: Kappa0Constants,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Config(format!("h = {h} outside (0, 1]")));
    }
    kappa0_core((2.0 / (alpha * h)).ln(), m, d, r, bias0, eps, constants)
}

/// GOE critical value `(B_w + (2π)^{-1/2} M^{3/2} q) ε²`, with `q` the
/// `(1−α)`-quantile of `λ_max(GOE(d−r))`.
pub fn kappa1(weights: &SpectralWeights, eps: f64, q_goe: f64) -> f64 {
    let scale = weights.m.powf(1.5) / (2.0 * std::f64::consts::PI).sqrt();
    (weights.b_w + scale * q_goe) * eps * eps
}

/// Simulation critical value `q ε²`, with `q` a quantile of `Λ_M` (or of the
/// maximum of `K` copies).
pub fn kappa2(q_lambda: f64, eps: f64) -> f64 {
    q_lambda * eps * eps
}

/// `(λ − B_w ε²) / (‖(j²w_j)‖_ℓ² ε²)`.
pub fn standardize(statistic: f64, weights: &SpectralWeights, eps: f64) -> f64 {
    let e2 = eps * eps;
    (statistic - weights.b_w * e2) / (weights.l2_j2w * e2)
}

/// `(λ − B_w ε²) / √(c M³ ε⁴)`, the large-M version of [`standardize`].
pub fn standardize_asymptotic(statistic: f64, weights: &SpectralWeights, eps: f64, c: f64) -> f64 {
    let e2 = eps * eps;
    (statistic - weights.b_w * e2) / (c * weights.m.powi(3)).sqrt() / e2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_weights, WeightMode};

    #[test]
    fn zero_inputs() {
        assert_eq!(kappa0(0.05, 10.0, 10, 1, 0.0, 0.0).unwrap(), 0.0);
        let w = make_weights(10.0, 15, WeightMode::FiniteRenorm).unwrap();
        assert_eq!(kappa1(&w, 0.0, 3.0), 0.0);
        assert_eq!(kappa2(50.0, 0.0), 0.0);
    }

    #[test]
    fn kink_point() {
        let (d, r, alpha) = (5, 2, 0.05);
        let m = 6.0 * d as f64;
        let k = kappa0(alpha, m, d, r, 0.25, 0.0).unwrap();
        let factor = 1.0 + (4.0 * 3.0f64).ln() + 21.0 * (2.0 / alpha).ln() / m;
        assert!((k - factor).abs() < 1e-14);
    }

    #[test]
    fn kappa0_errors_and_monotonicity() {
        assert!(kappa0(0.05, 10.0, 3, 3, 0.1, 0.1).is_err());
        assert!(kappa0(1.5, 10.0, 3, 1, 0.1, 0.1).is_err());
        let base = kappa0(0.05, 10.0, 10, 1, 0.01, 0.01).unwrap();
        assert!(kappa0(0.05, 10.0, 10, 1, 0.02, 0.01).unwrap() > base);
        assert!(kappa0(0.05, 10.0, 10, 1, 0.01, 0.02).unwrap() > base);
    }

    #[test]
    fn global_single_block_is_local() {
        let c = Kappa0Constants::default();
        let a = kappa_global_nonasym(0.05, 1.0, 10.0, 10, 1, 0.05, 0.01, c).unwrap();
        let b = kappa0(0.05, 10.0, 10, 1, 0.05, 0.01).unwrap();
        assert_eq!(a, b);
        let g = kappa_global_nonasym(0.05, 0.5, 10.0, 10, 1, 0.05, 0.01, c).unwrap();
        assert!(g > b);
    }

    #[test]
    fn goe_scalar_case() {
        let w = make_weights(1.0, 1, WeightMode::FiniteRenorm).unwrap();
        let q = std::f64::consts::SQRT_2 * 1.644_853_626_951_472_2;
        let k = kappa1(&w, 1.0, q);
        assert!((k - 1.9280).abs() < 1e-4);
    }

    #[test]
    fn standardize_inverts() {
        let w = make_weights(10.0, 15, WeightMode::FiniteRenorm).unwrap();
        let eps = 0.02;
        let z = standardize(w.b_w * eps * eps + 3.0 * w.l2_j2w * eps * eps, &w, eps);
        assert!((z - 3.0).abs() < 1e-12);
    }
}
