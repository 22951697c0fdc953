//! Tests for the rank of a spot covariance matrix observed through noisy,
//! equidistant high-frequency data.
//!
//! - [`matrix`]: symmetric eigen-solves, GOE and `Λ_M` quantiles, deviation bounds.
//! - [`spectral`]: local spectral statistics and the covariance estimator on blocks.
//! - [`simulate`]: Euler paths with factor structure plus observation noise.
//! - [`rank_test`]: local, global and rank-scan tests with three critical values.
//! - [`experiments`]: Monte Carlo size, power, CLT and detection studies.
//! - [`io`]: grid files, reports and tick ingestion.
//!
//! ```
//! use spotrank::matrix::QuantileSource;
//! use spotrank::rank_test::{global_test, TestConfig, Variant};
//! use spotrank::simulate::{simulate_scenario, SimScenario};
//!
//! let (_, grid) = simulate_scenario(&SimScenario::h0(3, 3_000, 0.001, 7), 0).unwrap();
//! let cfg = TestConfig::new(Variant::Nonasym, 0.05, 1, 100);
//! let res = global_test(&grid, &cfg, &QuantileSource::default()).unwrap();
//! assert_eq!(res.decisions.len(), 30);
//! ```

pub mod error;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod rank_test;
pub mod rng;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
