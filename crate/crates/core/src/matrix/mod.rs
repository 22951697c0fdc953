//! Random-matrix primitives: symmetric eigensolver, GOE and `Λ_M` sampling,
//! Monte Carlo quantile tables, the GOE covariance tensor and the
//! maximal-eigenvalue deviation bound.

mod deviation;
mod goe;
mod quantile;
mod sym;

pub use deviation::{default_delta_grid, deviation_bound, DeviationBoundInputs};
pub use goe::{sample_goe, vec_index, z_d_tensor};
pub use quantile::{
    empirical_quantile_sorted, goe_max_eig_quantile, goe_max_eig_quantiles, goe_max_eig_samples,
    lambda_m_from_draws, lambda_m_max_quantile, lambda_m_max_quantiles,
    lambda_m_max_quantiles_multi, lambda_m_quantile, lambda_m_quantiles, lambda_m_samples,
    sample_lambda_m, LambdaMSampler, QuantileCache, QuantileEntry, QuantileSource, QuantileTable,
    StatisticKind, DEFAULT_NSIM, DEFAULT_NSIM_MAX, DEFAULT_QUANTILE_SEED, MIN_NSIM,
    STANDARD_ALPHAS,
};
pub use sym::{eig_sym, eigenvalues_desc, SymEigen, SymMatrix};
pub(crate) use sym::eigenvalues_desc_raw;
