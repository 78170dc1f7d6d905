//! Line-delimited tuning records: one flat JSON object per line with fixed
//! dotted field names. Files are only ever appended to.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bsr::ProblemShape;
use crate::error::Result;
use crate::kernels::{Schedule, ScheduleKind};

/// One measured trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningRecord {
    pub shape: ProblemShape,
    pub sparsity: f64,
    pub seed: u64,
    pub schedule: Schedule,
    pub median_ns: u64,
    pub min_ns: u64,
    pub mean_ns: u64,
    pub repeats: usize,
    pub timestamp: String,
    pub env: String,
    /// False when the trial's output failed verification; timings are then zero.
    pub valid: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    #[serde(rename = "shape.m")]
    m: usize,
    #[serde(rename = "shape.k")]
    k: usize,
    #[serde(rename = "shape.n")]
    n: usize,
    #[serde(rename = "shape.br")]
    br: usize,
    #[serde(rename = "shape.bc")]
    bc: usize,
    sparsity: f64,
    seed: u64,
    #[serde(rename = "schedule.kind")]
    kind: String,
    #[serde(rename = "schedule.t")]
    t: Option<usize>,
    #[serde(rename = "schedule.tile_rows", default, skip_serializing_if = "Option::is_none")]
    tile_rows: Option<usize>,
    #[serde(rename = "schedule.tile_cols", default, skip_serializing_if = "Option::is_none")]
    tile_cols: Option<usize>,
    median_ns: u64,
    min_ns: u64,
    mean_ns: u64,
    repeats: usize,
    timestamp_iso8601: String,
    env: String,
    valid: bool,
}

impl From<&TuningRecord> for RecordLine {
    fn from(r: &TuningRecord) -> Self {
        let tile = r.schedule.tile();
        RecordLine {
            m: r.shape.m,
            k: r.shape.k,
            n: r.shape.n,
            br: r.shape.b_r,
            bc: r.shape.b_c,
            sparsity: r.sparsity,
            seed: r.seed,
            kind: r.schedule.kind().name().to_string(),
            t: r.schedule.lanes(),
            tile_rows: tile.map(|t| t.0),
            tile_cols: tile.map(|t| t.1),
            median_ns: r.median_ns,
            min_ns: r.min_ns,
            mean_ns: r.mean_ns,
            repeats: r.repeats,
            timestamp_iso8601: r.timestamp.clone(),
            env: r.env.clone(),
            valid: r.valid,
        }
    }
}

impl TryFrom<RecordLine> for TuningRecord {
    type Error = String;

    fn try_from(l: RecordLine) -> std::result::Result<Self, String> {
        let schedule = match (l.kind.parse::<ScheduleKind>()?, l.t, l.tile_rows, l.tile_cols) {
            (ScheduleKind::Pep, None, None, None) => Schedule::Pep,
            (ScheduleKind::Prob, None, None, None) => Schedule::Prob,
            (ScheduleKind::Prwb, Some(lanes), None, None) => Schedule::Prwb { lanes },
            (ScheduleKind::Ptp, None, Some(tile_rows), Some(tile_cols)) => Schedule::Ptp { tile_rows, tile_cols },
            _ => return Err(format!("inconsistent parameters for schedule '{}'", l.kind)),
        };
        if l.repeats == 0 {
            return Err("repeats must be >= 1".into());
        }
        if l.min_ns > l.median_ns {
            return Err(format!("min_ns {} exceeds median_ns {}", l.min_ns, l.median_ns));
        }
        Ok(TuningRecord {
            shape: ProblemShape::new(l.m, l.k, l.n, l.br, l.bc).map_err(|e| e.to_string())?,
            sparsity: l.sparsity,
            seed: l.seed,
            schedule,
            median_ns: l.median_ns,
            min_ns: l.min_ns,
            mean_ns: l.mean_ns,
            repeats: l.repeats,
            timestamp: l.timestamp_iso8601,
            env: l.env,
            valid: l.valid,
        })
    }
}

impl TuningRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(&RecordLine::from(self)).expect("record serializes")
    }

    pub fn from_line(line: &str) -> std::result::Result<Self, String> {
        let raw: RecordLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
        raw.try_into()
    }
}

/// A line that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// 1-based.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedRecords {
    pub records: Vec<TuningRecord>,
    pub errors: Vec<RecordError>,
}

/// Appends records to `path`, creating it if needed.
pub fn save_records(records: &[TuningRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_line());
        text.push('\n');
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

/// Reads every record; malformed lines are collected in `errors`, blank lines skipped.
pub fn load_records(path: impl AsRef<Path>) -> Result<LoadedRecords> {
    Ok(parse_records(&fs::read_to_string(path)?))
}

pub fn parse_records(text: &str) -> LoadedRecords {
    let mut out = LoadedRecords::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match TuningRecord::from_line(line) {
            Ok(r) => out.records.push(r),
            Err(message) => out.errors.push(RecordError { line: i + 1, message }),
        }
    }
    out
}
