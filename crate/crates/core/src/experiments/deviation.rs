use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::summary::Rate;
use crate::error::{Error, Result};
use crate::matrix::{default_delta_grid, deviation_bound, DeviationBoundInputs, LambdaMSampler};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationPlan {
    /// Variances `s_j` of the independent `Γ_j ~ N(0, s_j I_d)`.
    pub s: Vec<f64>,
    pub dim: usize,
    pub alphas: Vec<f64>,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default = "default_delta_grid")]
    pub delta_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub alpha: f64,
    pub bound: f64,
    /// Exceedances `λmax(Σ_j Γ_j Γ_jᵀ) ≥ bound`.
    #[serde(flatten)]
    pub exceed: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub plan: DeviationPlan,
    pub rows: Vec<DeviationRow>,
}

/// Empirical tail of `λmax(Σ_j Γ_j Γ_jᵀ)` at the deviation bound for each level.
pub fn mc_deviation_check(plan: &DeviationPlan) -> Result<DeviationReport> {
    if plan.reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    let bounds: Vec<f64> = plan
        .alphas
        .iter()
        .map(|&alpha| {
            deviation_bound(&DeviationBoundInputs {
                s: plan.s.clone(),
                dim: plan.dim,
                alpha,
                delta_grid: plan.delta_grid.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let proto = LambdaMSampler::from_coeffs(plan.dim, plan.s.clone());
    let draws: Vec<f64> = (0..plan.reps as u64)
        .into_par_iter()
        .map(|i| proto.clone().sample(&mut rng::stream(plan.master_seed, i)))
        .collect();
    let rows = plan
        .alphas
        .iter()
        .zip(&bounds)
        .map(|(&alpha, &bound)| DeviationRow {
            alpha,
            bound,
            exceed: Rate::new(draws.iter().filter(|x| **x >= bound).count(), plan.reps),
        })
        .collect();
    Ok(DeviationReport {
        plan: plan.clone(),
        rows,
    })
}
