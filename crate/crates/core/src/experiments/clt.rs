use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::summary::skewness;
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::rng;
use crate::simulate::psd_factor;
use crate::spectral::{
    exact_cov_constant_sigma, local_estimate, local_noise_level, make_weights, Block, SineBasis,
    SpectralStats, WeightMode,
};

/// Constant-covariance experiment on the block `[0, h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltPlan {
    pub d: usize,
    /// Row-major `d×d`.
    pub sigma: Vec<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "J")]
    pub j: usize,
    pub weights_mode: WeightMode,
    pub n: usize,
    pub h: f64,
    pub eta: f64,
    pub reps: usize,
    pub master_seed: u64,
}

impl CltPlan {
    /// `Σ = I_d`, one block `[0, 1]` and `η` chosen so that `ε = eps`.
    pub fn identity(d: usize, m: f64, j: usize, n: usize, eps: f64, reps: usize, master_seed: u64) -> Self {
        let mut sigma = vec![0.0; d * d];
        for i in 0..d {
            sigma[i * d + i] = 1.0;
        }
        CltPlan {
            d,
            sigma,
            m,
            j,
            weights_mode: WeightMode::CwInfinite,
            n,
            h: 1.0,
            eta: eps * (n as f64).sqrt() / std::f64::consts::PI,
            reps,
            master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub plan: CltPlan,
    pub eps: f64,
    /// `d² × d²` row-major, indices follow the column-stacked `vec`.
    pub empirical_cov: Vec<f64>,
    pub exact_cov: Vec<f64>,
    /// `‖empirical − exact‖_F / ‖exact‖_F`.
    pub rel_frobenius_error: f64,
    /// Largest `|empirical − exact| / se` over entries with positive se.
    pub max_abs_z: f64,
    /// Sample mean of `vec(Σ̂)`.
    pub mean: Vec<f64>,
    /// Skewness of each diagonal entry of `Σ̂`.
    pub diag_skewness: Vec<f64>,
}

const BATCH: usize = 64;

/// Draws `vec(Σ̂)` for `reps` replications of the constant-covariance model.
pub(crate) fn simulate_vec_sigma_hat(plan: &CltPlan) -> Result<(f64, Vec<Vec<f64>>)> {
    let d = plan.d;
    let sigma = SymMatrix::from_row_slice(d, &plan.sigma)?;
    let (factor, _) = psd_factor(&sigma)?;
    let weights = make_weights(plan.m, plan.j, plan.weights_mode)?;
    let block = Block::new(0.0, plan.h, plan.n)?;
    let basis = SineBasis::new(plan.n, &block, plan.j)?;
    let eps = local_noise_level(plan.n, plan.h, plan.eta)?;
    let len = basis.len();
    let sd = (1.0 / plan.n as f64).sqrt();
    let batches: Vec<usize> = (0..plan.reps).step_by(BATCH).collect();
    let out: Vec<Vec<Vec<f64>>> = batches
        .par_iter()
        .map(|&start| -> Result<Vec<Vec<f64>>> {
            let b = BATCH.min(plan.reps - start);
            let mut dy = DMatrix::<f64>::zeros(len, d * b);
            let mut z = vec![0.0; d];
            let mut e_prev = vec![0.0; d];
            for rep in 0..b {
                let mut r = rng::stream(plan.master_seed, (start + rep) as u64);
                for e in e_prev.iter_mut() {
                    *e = plan.eta * Distribution::<f64>::sample(&StandardNormal, &mut r);
                }
                for m in 0..len {
                    z.iter_mut().for_each(|x| *x = sd * Distribution::<f64>::sample(&StandardNormal, &mut r));
                    for k in 0..d {
                        let mut x = 0.0;
                        for (c, zc) in z.iter().enumerate() {
                            x += factor[(k, c)] * zc;
                        }
                        let e: f64 = plan.eta * Distribution::<f64>::sample(&StandardNormal, &mut r);
                        dy[(m, rep * d + k)] = x + e - e_prev[k];
                        e_prev[k] = e;
                    }
                }
            }
            let s = basis.values() * dy;
            (0..b)
                .map(|rep| {
                    let stats = SpectralStats {
                        block,
                        j: plan.j,
                        s: s.columns(rep * d, d).into_owned(),
                    };
                    let est = local_estimate(&stats, &weights, eps)?;
                    Ok(est.sigma_hat.as_matrix().as_slice().to_vec())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((eps, out.into_iter().flatten().collect()))
}

/// Compares the empirical covariance of `vec(Σ̂)` with the exact covariance
/// for constant `Σ`.
pub fn mc_clt_check(plan: &CltPlan) -> Result<CltReport> {
    if plan.reps < 2 {
        return Err(Error::Config("need at least 2 replications".into()));
    }
    let d = plan.d;
    let d2 = d * d;
    let (eps, draws) = simulate_vec_sigma_hat(plan)?;
    let reps = draws.len() as f64;
    let mut mean = vec![0.0; d2];
    for x in &draws {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / reps;
        }
    }
    let mut cov = vec![0.0; d2 * d2];
    let mut fourth = vec![0.0; d2 * d2];
    for x in &draws {
        for a in 0..d2 {
            let ca = x[a] - mean[a];
            for b in 0..d2 {
                let p = ca * (x[b] - mean[b]);
                cov[a * d2 + b] += p;
                fourth[a * d2 + b] += p * p;
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= reps - 1.0);
    let weights = make_weights(plan.m, plan.j, plan.weights_mode)?;
    let sigma = SymMatrix::from_row_slice(d, &plan.sigma)?;
    let exact_m = exact_cov_constant_sigma(&sigma, &weights, eps)?;
    let exact: Vec<f64> = (0..d2 * d2).map(|i| exact_m[(i / d2, i % d2)]).collect();
    let diff: f64 = cov.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = exact.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut max_abs_z = 0.0f64;
    for i in 0..d2 * d2 {
        let var = fourth[i] / reps - cov[i] * cov[i];
        if var > 0.0 {
            max_abs_z = max_abs_z.max((cov[i] - exact[i]).abs() / (var / reps).sqrt());
        }
    }
    let diag_skewness = (0..d)
        .map(|k| {
            let idx = k + k * d;
            skewness(&draws.iter().map(|x| x[idx]).collect::<Vec<_>>())
        })
        .collect();
    Ok(CltReport {
        plan: plan.clone(),
        eps,
        empirical_cov: cov,
        exact_cov: exact,
        rel_frobenius_error: if norm > 0.0 { diff / norm } else { diff },
        max_abs_z,
        mean,
        diag_skewness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_identity_case() {
        let plan = CltPlan::identity(2, 10.0, 10, 400, 0.1, 4000, 5);
        let rep = mc_clt_check(&plan).unwrap();
        assert!((rep.eps - 0.1).abs() < 1e-12);
        assert!(rep.rel_frobenius_error < 0.1, "{}", rep.rel_frobenius_error);
        let again = mc_clt_check(&plan).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn pure_noise_wick_pattern() {
        let mut plan = CltPlan::identity(2, 5.0, 5, 400, 0.2, 4000, 6);
        plan.sigma = vec![0.0; 4];
        let rep = mc_clt_check(&plan).unwrap();
        let w = make_weights(5.0, 5, WeightMode::CwInfinite).unwrap();
        let v = w.l2_j2w.powi(2) * 0.2f64.powi(4);
        // diagonal entries of Σ̂ have variance 2v, the off-diagonal one v
        assert!((rep.exact_cov[0] - 2.0 * v).abs() < 1e-15);
        assert!((rep.exact_cov[5] - v).abs() < 1e-15);
        assert!(rep.rel_frobenius_error < 0.1, "{}", rep.rel_frobenius_error);
    }
}
