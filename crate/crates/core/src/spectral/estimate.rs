use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{SpectralStats, SpectralWeights};
use crate::error::{Error, Result};
use crate::matrix::{eigenvalues_desc_raw, z_d_tensor, SymMatrix};

/// Local noise level `ε_{n,h} = π η / (h √n)`.
pub fn local_noise_level(n: usize, h: f64, eta: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("block length h = {h} must be positive")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    if !(eta >= 0.0) {
        return Err(Error::InvalidInput(format!("eta = {eta} must be >= 0")));
    }
    Ok(std::f64::consts::PI * eta / (h * (n as f64).sqrt()))
}

/// Block estimate: `Ĉ = Σ_j w_j S̃_j S̃_jᵀ` and `Σ̂ = Ĉ − shift·I` with
/// `shift = B_w ε²`.
///
/// The diagonal of `Ĉ` and the shift are rounded to the binary grid of the
/// unit in the last place of the largest of them. On that grid subtracting
/// and re-adding the shift is exact, so `Σ̂ + shift·I` reproduces `Ĉ`
/// bit for bit. The rounding moves no entry by more than half an ulp of the
/// largest diagonal entry.
#[derive(Debug, Clone)]
pub struct LocalEstimate {
    pub c_hat: SymMatrix,
    pub sigma_hat: SymMatrix,
    pub eps: f64,
    pub shift: f64,
    /// Eigenvalues of `Ĉ`, descending.
    pub eigenvalues_c: Vec<f64>,
}

fn ulp_grid(values: impl Iterator<Item = f64>) -> Option<f64> {
    let m = values.fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 || !m.is_normal() {
        return None;
    }
    let exp = ((m.to_bits() >> 52) & 0x7ff) as i32 - 1023;
    if exp - 52 < -1022 {
        return None;
    }
    Some(2f64.powi(exp - 52))
}

#[inline]
fn to_grid(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

pub fn local_estimate(stats: &SpectralStats, weights: &SpectralWeights, eps: f64) -> Result<LocalEstimate> {
    if stats.j != weights.j {
        return Err(Error::DimensionMismatch {
            expected: weights.j,
            got: stats.j,
        });
    }
    let d = stats.d();
    let mut c = SymMatrix::zeros(d);
    let mut row = vec![0.0; d];
    for (k, wk) in weights.w.iter().enumerate() {
        for (dst, src) in row.iter_mut().zip(stats.s.row(k).iter()) {
            *dst = *src;
        }
        c.add_outer(*wk, &row);
    }
    let mut shift = weights.b_w * eps * eps;
    let mut c = c.into_inner();
    if let Some(q) = ulp_grid((0..d).map(|i| c[(i, i)]).chain(std::iter::once(shift))) {
        for i in 0..d {
            c[(i, i)] = to_grid(c[(i, i)], q);
        }
        shift = to_grid(shift, q);
    }
    let mut sigma = c.clone();
    for i in 0..d {
        sigma[(i, i)] -= shift;
    }
    let eigenvalues_c = eigenvalues_desc_raw(c.clone());
    Ok(LocalEstimate {
        c_hat: SymMatrix::from_matrix_unchecked(c),
        sigma_hat: SymMatrix::from_matrix_unchecked(sigma),
        eps,
        shift,
        eigenvalues_c,
    })
}

/// Parameters of the composite null `H₀(I, β, L, λ̲_r)` and, for
/// alternatives, the prescribed `λ̲_{r+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisParams {
    pub r: usize,
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// Lower bound `λ̲_r` on the r-th eigenvalue under the null.
    pub lambda_gap: f64,
    /// `λ̲_{r+1}` for alternatives.
    pub lambda_alt: Option<f64>,
}

impl HypothesisParams {
    pub fn new(r: usize, beta: f64, l: f64, lambda_gap: f64) -> Self {
        HypothesisParams {
            r,
            beta,
            l,
            lambda_gap,
            lambda_alt: None,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.r >= d {
            return Err(Error::Config(format!("rank r = {} must be < d = {d}", self.r)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta = {} outside (0, 1]", self.beta)));
        }
        if !(self.l > 0.0) {
            return Err(Error::Config(format!("L = {} must be positive", self.l)));
        }
        if !(self.lambda_gap >= 0.0) {
            return Err(Error::Config("spectral gap must be >= 0".into()));
        }
        if let Some(a) = self.lambda_alt {
            if !(a > 0.0) {
                return Err(Error::Config("alternative eigenvalue must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Bias bound `(2Lh^β) ∧ ((r+4) L² h^{2β} / λ̲_r)`; the second branch is
/// dropped when `λ̲_r = 0`.
pub fn bias0(params: &HypothesisParams, h: f64) -> f64 {
    let hb = h.powf(params.beta);
    let first = 2.0 * params.l * hb;
    if params.lambda_gap <= 0.0 {
        return first;
    }
    let second = (params.r as f64 + 4.0) * params.l * params.l * hb * hb / params.lambda_gap;
    first.min(second)
}

/// Exact `Cov(vec(Σ̂))` for `Σ` constant on the block:
/// `(Σ_{j≤J} w_j² C_j ⊗ C_j) 𝒵_d` with `C_j = Σ + j²ε² I`.
pub fn exact_cov_constant_sigma(sigma: &SymMatrix, weights: &SpectralWeights, eps: f64) -> Result<DMatrix<f64>> {
    let d = sigma.dim();
    let ev = eigenvalues_desc_raw(sigma.as_matrix().clone());
    let tol = 1e-12 * (1.0 + ev[0].abs());
    if ev[d - 1] < -tol {
        return Err(Error::InvalidInput(format!(
            "Σ is not positive semi-definite (smallest eigenvalue {})",
            ev[d - 1]
        )));
    }
    let mut acc = DMatrix::zeros(d * d, d * d);
    for (k, wk) in weights.w.iter().enumerate() {
        let j = (k + 1) as f64;
        let mut cj = sigma.as_matrix().clone();
        for i in 0..d {
            cj[(i, i)] += j * j * eps * eps;
        }
        acc += cj.kronecker(&cj) * (wk * wk);
    }
    Ok(acc * z_d_tensor(d))
}
