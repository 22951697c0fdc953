use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("block [{t}, {t_end}] holds {have} increments but at least {need} are required (J)")]
    BlockTooSmall {
        t: f64,
        t_end: f64,
        have: usize,
        need: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("nsim = {nsim} is below the minimum of {min} Monte Carlo draws")]
    TooFewSimulations { nsim: usize, min: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("symbol {symbol}: {reason}")]
    Symbol { symbol: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::BlockTooSmall { .. } => "block_too_small",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::TooFewSimulations { .. } => "too_few_simulations",
            Error::Numerical(_) => "numerical",
            Error::Symbol { .. } => "symbol",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code: 2 input error, 3 config error, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Symbol { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::DimensionMismatch { .. } => 2,
            Error::Config(_) | Error::BlockTooSmall { .. } | Error::TooFewSimulations { .. } => 3,
            Error::Numerical(_) => 4,
        }
    }
}
