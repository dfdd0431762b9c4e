//! CSV trace and JSON metadata sidecar.
//!
//! Floats are written with 17 significant digits so every value round-trips.
//! The exact-observable columns are left empty when no oracle ran.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{RunSummary, StepPolicy, StepRecord, ToleranceSet, TraceLog};
use crate::error::{Error, Result};
use crate::state::OracleSettings;

pub const CSV_COLUMNS: [&str; 15] = [
    "m", "t", "dt", "trials", "frozen", "E_i", "E_f", "var_i", "var_f", "cum_dE", "cum_dVar", "Mx", "Mz", "exact_Mx",
    "exact_Mz",
];

fn num(out: &mut String, v: f64) {
    // `+ 0.0` folds negative zero
    write!(out, ",{:.16e}", v + 0.0).expect("writing to a String");
}

pub fn to_csv(log: &TraceLog) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in &log.records {
        write!(
            out,
            "{},{:.16e},{:.16e},{},{}",
            r.m, r.t, r.dt, r.trials, r.frozen as u8
        )
        .expect("writing to a String");
        for v in [r.e_i, r.e_f, r.var_i, r.var_f, r.cum_de, r.cum_dvar, r.mx, r.mz] {
            num(&mut out, v);
        }
        for v in [r.exact_mx, r.exact_mz] {
            match v {
                Some(v) => num(&mut out, v),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Parses a trace written by [`to_csv`].
pub fn from_csv(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty trace".into()))?;
    if header != CSV_COLUMNS.join(",") {
        return Err(Error::Parse(format!("unexpected trace header `{header}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != CSV_COLUMNS.len() {
                return Err(Error::Parse(format!(
                    "row {}: expected {} cells, got {}",
                    i + 1,
                    CSV_COLUMNS.len(),
                    cells.len()
                )));
            }
            let bad = |c: usize| Error::Parse(format!("row {}: bad `{}` value `{}`", i + 1, CSV_COLUMNS[c], cells[c]));
            let f = |c: usize| cells[c].parse::<f64>().map_err(|_| bad(c));
            let u = |c: usize| cells[c].parse::<usize>().map_err(|_| bad(c));
            let opt = |c: usize| if cells[c].is_empty() { Ok(None) } else { f(c).map(Some) };
            Ok(StepRecord {
                m: u(0)?,
                t: f(1)?,
                dt: f(2)?,
                trials: u(3)?,
                frozen: match cells[4] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad(4)),
                },
                e_i: f(5)?,
                e_f: f(6)?,
                var_i: f(7)?,
                var_f: f(8)?,
                cum_de: f(9)?,
                cum_dvar: f(10)?,
                mx: f(11)?,
                mz: f(12)?,
                exact_mx: opt(13)?,
                exact_mz: opt(14)?,
            })
        })
        .collect()
}

/// Everything needed to reproduce and interpret a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub mode: String,
    /// The full run configuration as parsed.
    pub config: serde_json::Value,
    pub tolerances: Option<ToleranceSet>,
    pub policy: Option<StepPolicy>,
    pub oracle: Option<OracleSettings>,
    pub summary: Option<RunSummary>,
    pub columns: Vec<String>,
    /// Mode-specific results that do not fit the trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

impl RunMetadata {
    pub fn new(mode: &str, config: serde_json::Value) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            mode: mode.to_string(),
            config,
            tolerances: None,
            policy: None,
            oracle: None,
            summary: None,
            columns: CSV_COLUMNS.iter().map(|c| c.to_string()).collect(),
            extra: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("metadata: {e}")))
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_trace(dir: &Path, stem: &str, log: &TraceLog, meta: &RunMetadata) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.csv")), to_csv(log))?;
    std::fs::write(dir.join(format!("{stem}.json")), meta.to_json())?;
    Ok(())
}
