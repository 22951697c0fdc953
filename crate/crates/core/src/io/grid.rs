use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{GridMeta, ObservationGrid};

pub const GRID_FILE: &str = "grid.csv";
pub const META_FILE: &str = "meta.json";

/// Writes `grid.csv` (`t_index,y_1,…,y_d`) and `meta.json` into `dir`.
///
/// Values use the shortest representation that parses back to the same
/// `f64`, so a write/read cycle is lossless.
pub fn write_grid(grid: &ObservationGrid, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(GRID_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    let d = grid.d();
    let mut header = vec!["t_index".to_string()];
    header.extend((1..=d).map(|k| format!("y_{k}")));
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(d + 1);
    for i in 0..=grid.n() {
        rec.clear();
        rec.push(i.to_string());
        rec.extend(grid.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let meta = dir.join(META_FILE);
    let body = serde_json::to_string_pretty(&grid.meta)?;
    fs::write(&meta, body + "\n").map_err(|e| Error::io(&meta, e))
}

pub fn read_grid(dir: &Path) -> Result<ObservationGrid> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: GridMeta = serde_json::from_str(&text)?;
    let path = dir.join(GRID_FILE);
    let mut r = csv::Reader::from_path(&path)?;
    let d = r.headers()?.len().saturating_sub(1);
    if d != meta.d {
        return Err(Error::InvalidInput(format!(
            "{}: {d} value columns but metadata says d = {}",
            path.display(),
            meta.d
        )));
    }
    let mut values = Vec::with_capacity((meta.n + 1) * d);
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let idx: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("{}: bad t_index on row {}", path.display(), row + 1)))?;
        if idx != row {
            return Err(Error::InvalidInput(format!(
                "{}: t_index {idx} out of order on row {}",
                path.display(),
                row + 1
            )));
        }
        for field in rec.iter().skip(1) {
            values.push(field.trim().parse::<f64>().map_err(|_| {
                Error::InvalidInput(format!("{}: bad value {field:?} on row {}", path.display(), row + 1))
            })?);
        }
    }
    let grid = ObservationGrid::new(d, values, meta.eta, meta.seed, &meta.scenario)?;
    if grid.n() != meta.n {
        return Err(Error::InvalidInput(format!(
            "{}: {} intervals but metadata says n = {}",
            path.display(),
            grid.n(),
            meta.n
        )));
    }
    Ok(grid)
}
