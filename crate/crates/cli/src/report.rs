//! Report JSON and point-cloud CSV emission.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Bumped when a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

/// Header of every `points.csv`.
pub const POINTS_HEADER: [&str; 5] = ["series", "index", "x", "y", "word"];
/// Header of `sweep.csv`.
pub const SWEEP_HEADER: [&str; 4] = ["eta", "trials", "passes", "pass_rate"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    /// Unasserted checks are reported but do not affect the exit status.
    pub asserted: bool,
    pub value: Option<f64>,
    pub threshold: Option<String>,
    pub detail: Option<String>,
    /// The check failed because a search budget ran out.
    pub budget_exhausted: bool,
}

impl CheckOutcome {
    pub fn asserted(name: impl Into<String>, pass: bool) -> Self {
        CheckOutcome { name: name.into(), pass, asserted: true, value: None, threshold: None, detail: None, budget_exhausted: false }
    }

    pub fn info(name: impl Into<String>, pass: bool) -> Self {
        CheckOutcome { asserted: false, ..Self::asserted(name, pass) }
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn threshold(mut self, t: impl Into<String>) -> Self {
        self.threshold = Some(t.into());
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    pub fn budget(mut self, exhausted: bool) -> Self {
        self.budget_exhausted = exhausted;
        self
    }
}

/// One row of `points.csv`: a 1- or 2-dimensional point with an optional word.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRow {
    pub series: String,
    pub index: usize,
    pub x: f64,
    pub y: Option<f64>,
    /// Symbols joined by `.`; empty when the point has no word.
    pub word: String,
}

impl PointRow {
    pub fn new(series: &str, index: usize, p: &[f64], word: Option<&[usize]>) -> Self {
        PointRow {
            series: series.to_string(),
            index,
            x: p[0],
            y: p.get(1).copied(),
            word: word.map(|w| w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(".")).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCsvRow {
    pub eta: f64,
    pub trials: usize,
    pub passes: usize,
    pub pass_rate: f64,
}

/// What a preset returns before the runner adds identity and timing.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub params: serde_json::Value,
    pub checks: Vec<CheckOutcome>,
    pub summary: serde_json::Value,
    pub points: Vec<PointRow>,
    pub sweep: Option<Vec<SweepCsvRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub experiment: String,
    pub seed: u64,
    pub budget: Option<usize>,
    /// Resolved parameters, defaults included.
    pub params: serde_json::Value,
    /// Sorted by name.
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
    pub summary: serde_json::Value,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub wall_clock_ms: u128,
}

impl Report {
    /// 0 when every asserted check passed, 3 when a failure is a budget
    /// exhaustion, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else if self.checks.iter().any(|c| c.asserted && !c.pass && c.budget_exhausted) {
            3
        } else {
            1
        }
    }

    /// JSON with the wall clock zeroed, for reproducibility comparisons.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_ms = 0;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    pub fn failed_checks(&self) -> Vec<&CheckOutcome> {
        self.checks.iter().filter(|c| c.asserted && !c.pass).collect()
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output { path: path.display().to_string(), message: e.to_string() }
}

pub fn write_points(path: &Path, rows: &[PointRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(POINTS_HEADER).map_err(|e| io_err(path, e))?;
    for r in rows {
        let y = r.y.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([r.series.as_str(), &r.index.to_string(), &r.x.to_string(), &y, &r.word]).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_sweep(path: &Path, rows: &[SweepCsvRow]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(SWEEP_HEADER).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json(path: &Path, report: &Report) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    Ok(dir.to_path_buf())
}
