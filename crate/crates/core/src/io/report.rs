use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank_test::{GlobalTestResult, TestConfig, TestDecision};

/// Everything needed to rerun or recheck a test report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    #[serde(flatten)]
    pub test: TestConfig,
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    pub h: f64,
    /// Set when the block length was chosen by the rate rule.
    pub auto_block: bool,
    pub nsim: usize,
    pub quantile_seed: u64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub k: usize,
    pub t: f64,
    pub h: f64,
    pub eps: f64,
    pub statistic: f64,
    pub standardized: f64,
    pub kappa: f64,
    pub reject: bool,
}

impl From<&TestDecision> for BlockRow {
    fn from(d: &TestDecision) -> Self {
        BlockRow {
            k: d.k,
            t: d.block.t,
            h: d.block.h,
            eps: d.diagnostics.eps,
            statistic: d.statistic,
            standardized: d.standardized,
            kappa: d.kappa,
            reject: d.reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRow {
    pub reject: bool,
    pub kappa_g: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub dropped_increments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub config: ReportConfig,
    pub blocks: Vec<BlockRow>,
    /// Present for whole-session tests only.
    pub global: Option<GlobalRow>,
}

impl TestReport {
    pub fn new(config: ReportConfig, result: &GlobalTestResult) -> Self {
        let global = config.test.global.then(|| GlobalRow {
            reject: result.reject,
            kappa_g: result.kappa_g,
            k: result.k,
            dropped_increments: result.dropped_increments,
        });
        TestReport {
            blocks: result.decisions.iter().map(BlockRow::from).collect(),
            config,
            global,
        }
    }
}

/// Writes the report as JSON to `path` and a CSV mirror of the block rows
/// next to it (same stem, `.csv`). Returns both paths.
pub fn write_report(report: &TestReport, path: &Path) -> Result<(PathBuf, PathBuf)> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let body = serde_json::to_string_pretty(report)?;
    fs::write(path, body + "\n").map_err(|e| Error::io(path, e))?;
    let csv_path = path.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for row in &report.blocks {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok((path.to_path_buf(), csv_path))
}
