use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::{estimate_noise, NoiseEstimate};
use crate::error::{Error, Result};
use crate::spectral::ObservationGrid;

const DAY_MS: i64 = 86_400_000;
/// Ingestion aborts when more than this fraction of rows fails to parse.
const MAX_BAD_FRACTION: f64 = 0.01;

/// One row of a tick file `timestamp_ms,symbol,bid,ask[,price]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub timestamp_ms: i64,
    pub symbol: String,
    pub bid: Option<f64>,
    pub ask: Option<f64>,
    pub price: Option<f64>,
}

impl TickRecord {
    /// Mid-quote, or the trade price when the quote is incomplete.
    pub fn value(&self) -> Option<f64> {
        match (self.bid, self.ask) {
            (Some(b), Some(a)) => Some(0.5 * (b + a)),
            _ => self.price,
        }
    }

    fn parse(rec: &csv::StringRecord) -> Option<TickRecord> {
        if rec.len() != 4 && rec.len() != 5 {
            return None;
        }
        let num = |s: &str| -> Option<Option<f64>> {
            let s = s.trim();
            if s.is_empty() {
                Some(None)
            } else {
                s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
            }
        };
        let symbol = rec[1].trim();
        if symbol.is_empty() {
            return None;
        }
        let tick = TickRecord {
            timestamp_ms: rec[0].trim().parse().ok()?,
            symbol: symbol.to_string(),
            bid: num(&rec[2])?,
            ask: num(&rec[3])?,
            price: if rec.len() == 5 { num(&rec[4])? } else { None },
        };
        if let (Some(b), Some(a)) = (tick.bid, tick.ask) {
            if b > a {
                return None;
            }
        }
        tick.value().map(|_| tick)
    }
}

/// Trading session as time of day, `HH:MM-HH:MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub start_ms: i64,
    pub end_ms: i64,
}

impl Session {
    pub fn len_ms(&self) -> i64 {
        self.end_ms - self.start_ms
    }
}

fn parse_hhmm(s: &str) -> Option<i64> {
    let (h, m) = s.trim().split_once(':')?;
    let (h, m): (i64, i64) = (h.parse().ok()?, m.parse().ok()?);
    ((0..=24).contains(&h) && (0..60).contains(&m) && h * 60 + m <= 24 * 60).then_some((h * 60 + m) * 60_000)
}

impl FromStr for Session {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("session {s:?} is not HH:MM-HH:MM with start < end"));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let (start_ms, end_ms) = (parse_hhmm(a).ok_or_else(bad)?, parse_hhmm(b).ok_or_else(bad)?);
        if start_ms >= end_ms {
            return Err(bad());
        }
        Ok(Session { start_ms, end_ms })
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hm = |ms: i64| (ms / 3_600_000, ms / 60_000 % 60);
        let ((h0, m0), (h1, m1)) = (hm(self.start_ms), hm(self.end_ms));
        write!(f, "{h0:02}:{m0:02}-{h1:02}:{m1:02}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub session: Session,
    pub grid_seconds: f64,
    /// Use log prices.
    pub log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolCount {
    pub symbol: String,
    pub ticks_total: usize,
    pub ticks_in_session: usize,
    /// Leading grid points before the first tick of the day, filled with the
    /// first in-session value.
    pub backfilled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: Vec<PathBuf>,
    pub options: IngestOptions,
    /// Calendar day (days since the epoch) of the session.
    pub day: i64,
    pub rows_total: usize,
    pub rows_bad: usize,
    /// Coordinate order of the grid.
    pub symbols: Vec<String>,
    pub counts: Vec<SymbolCount>,
    pub n: usize,
    /// `None` when the grid is too short to estimate the noise level.
    pub noise: Option<NoiseEstimate>,
    #[serde(skip)]
    pub grid: Option<ObservationGrid>,
}

/// Files matching a glob pattern, sorted.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>> {
    let paths = glob::glob(pattern).map_err(|e| Error::InvalidInput(format!("bad glob {pattern:?}: {e}")))?;
    let mut out = Vec::new();
    for p in paths {
        out.push(p.map_err(|e| Error::io(e.path().to_path_buf(), std::io::Error::other(e.to_string())))?);
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("no files match {pattern:?}")));
    }
    Ok(out)
}

struct FileTicks {
    ticks: Vec<TickRecord>,
    rows: usize,
    bad: usize,
}

fn read_file(path: &Path) -> Result<FileTicks> {
    let mut r = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let expected = ["timestamp_ms", "symbol", "bid", "ask"];
    if header.len() < 4 || header[..4] != expected || (header.len() == 5 && header[4] != "price") || header.len() > 5 {
        return Err(Error::InvalidInput(format!(
            "{}: header must be timestamp_ms,symbol,bid,ask[,price]",
            path.display()
        )));
    }
    let mut out = FileTicks {
        ticks: Vec::new(),
        rows: 0,
        bad: 0,
    };
    for rec in r.records() {
        out.rows += 1;
        match rec.ok().as_ref().and_then(TickRecord::parse) {
            Some(t) => out.ticks.push(t),
            None => out.bad += 1,
        }
    }
    Ok(out)
}

/// Reads tick files, keeps one session and samples every symbol on a regular
/// grid by previous-tick interpolation.
///
/// The session day is the earliest day with an in-session tick; ticks of
/// that day before the session seed the first grid value. Symbols become
/// coordinates in lexicographic order. The grid's noise level is the
/// root-mean-square of the per-coordinate estimates.
pub fn ingest(files: &[PathBuf], opts: &IngestOptions) -> Result<IngestReport> {
    if files.is_empty() {
        return Err(Error::InvalidInput("no tick files given".into()));
    }
    let step = (opts.grid_seconds * 1000.0).round() as i64;
    if !(opts.grid_seconds > 0.0) || step < 1 || ((opts.grid_seconds * 1000.0) - step as f64).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "grid spacing {} s must be a positive whole number of milliseconds",
            opts.grid_seconds
        )));
    }
    let span = opts.session.len_ms();
    if span % step != 0 {
        return Err(Error::Config(format!(
            "session {} is not a whole number of {} s grid steps",
            opts.session, opts.grid_seconds
        )));
    }
    let n = (span / step) as usize;

    let parsed: Vec<FileTicks> = files.par_iter().map(|p| read_file(p)).collect::<Result<_>>()?;
    let rows_total: usize = parsed.iter().map(|f| f.rows).sum();
    let rows_bad: usize = parsed.iter().map(|f| f.bad).sum();
    if rows_total > 0 && rows_bad as f64 > MAX_BAD_FRACTION * rows_total as f64 {
        return Err(Error::InvalidInput(format!(
            "{rows_bad} of {rows_total} tick rows are unparseable (limit {}%)",
            MAX_BAD_FRACTION * 100.0
        )));
    }

    let in_session = |ts: i64| {
        let tod = ts.rem_euclid(DAY_MS);
        tod >= opts.session.start_ms && tod <= opts.session.end_ms
    };
    let day = parsed
        .iter()
        .flat_map(|f| f.ticks.iter())
        .filter(|t| in_session(t.timestamp_ms))
        .map(|t| t.timestamp_ms.div_euclid(DAY_MS))
        .min()
        .ok_or_else(|| Error::InvalidInput("no ticks fall inside the session".into()))?;
    let t0 = day * DAY_MS + opts.session.start_ms;
    let t1 = day * DAY_MS + opts.session.end_ms;

    // file order, then row order, breaks timestamp ties: the later row wins
    let mut by_symbol: BTreeMap<String, (usize, Vec<(i64, f64)>)> = BTreeMap::new();
    for f in &parsed {
        for t in &f.ticks {
            let entry = by_symbol.entry(t.symbol.clone()).or_default();
            entry.0 += 1;
            if t.timestamp_ms.div_euclid(DAY_MS) == day && t.timestamp_ms <= t1 {
                let mut v = t.value().expect("parsed ticks carry a value");
                if opts.log {
                    if v <= 0.0 {
                        return Err(Error::Symbol {
                            symbol: t.symbol.clone(),
                            reason: format!("non-positive value {v} at {} cannot be logged", t.timestamp_ms),
                        });
                    }
                    v = v.ln();
                }
                entry.1.push((t.timestamp_ms, v));
            }
        }
    }

    let d = by_symbol.len();
    let mut values = vec![0.0; (n + 1) * d];
    let mut counts = Vec::with_capacity(d);
    for (k, (symbol, (total, ticks))) in by_symbol.iter_mut().enumerate() {
        ticks.sort_by_key(|x| x.0);
        let in_sess = ticks.iter().filter(|x| x.0 >= t0).count();
        if in_sess < 2 {
            return Err(Error::Symbol {
                symbol: symbol.clone(),
                reason: format!("{in_sess} ticks inside session {} (need 2)", opts.session),
            });
        }
        let first_in = ticks.iter().find(|x| x.0 >= t0).expect("checked").1;
        let mut next = 0;
        let mut last: Option<f64> = None;
        let mut backfilled = 0;
        for i in 0..=n {
            let g = t0 + i as i64 * step;
            while next < ticks.len() && ticks[next].0 <= g {
                last = Some(ticks[next].1);
                next += 1;
            }
            values[i * d + k] = last.unwrap_or_else(|| {
                backfilled += 1;
                first_in
            });
        }
        counts.push(SymbolCount {
            symbol: symbol.clone(),
            ticks_total: *total,
            ticks_in_session: in_sess,
            backfilled,
        });
    }

    let scenario = if opts.log { "ingest-log" } else { "ingest" };
    let mut grid = ObservationGrid::new(d, values, 0.0, None, scenario)?;
    let noise = if n >= 10 { Some(estimate_noise(&grid)?) } else { None };
    if let Some(est) = &noise {
        grid.meta.eta = est.pooled;
    }
    Ok(IngestReport {
        files: files.to_vec(),
        options: *opts,
        day,
        rows_total,
        rows_bad,
        symbols: by_symbol.into_keys().collect(),
        counts,
        n,
        noise,
        grid: Some(grid),
    })
}
