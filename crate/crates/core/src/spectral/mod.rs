//! Localized spectral statistics and the block-wise spot covariance estimator.
//!
//! On a block `[t, t + h]` the increments of the observations are projected
//! onto the sine functions `Φ_j(s) = √(2/h) sin(jπ(s − t)/h)`. A weighted sum
//! of the outer products, corrected by `B_w ε²` for the noise floor,
//! estimates the average covariance on the block.

mod estimate;
mod grid;
mod stats;
mod weights;

pub use estimate::{
    bias0, exact_cov_constant_sigma, local_estimate, local_noise_level, HypothesisParams,
    LocalEstimate,
};
pub use grid::{Block, GridMeta, ObservationGrid};
pub use stats::{riemann_noise_factor, spectral_stats, SineBasis, SpectralStats};
pub use weights::{make_weights, SpectralWeights, WeightMode};
