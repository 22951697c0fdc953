//! File formats and tick-data ingestion.

mod grid;
mod noise;
mod report;
mod ticks;

pub use grid::{read_grid, write_grid, GRID_FILE, META_FILE};
pub use noise::{estimate_noise, NoiseEstimate};
pub use report::{write_report, BlockRow, GlobalRow, ReportConfig, TestReport};
pub use ticks::{expand_glob, ingest, IngestOptions, IngestReport, Session, SymbolCount, TickRecord};
