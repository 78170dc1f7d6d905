//! Benchmark suite over a grid of `(m, k, n)` shapes, square block sizes
//! and block sparsities, timing every requested schedule after verifying it.

mod suite;
mod table;

use std::fmt;
use std::str::FromStr;

pub use suite::{pep_trend, run_suite, run_suite_with, BenchCell, Outcome, ScheduleOutcome, Trend};
pub use table::{emit_table, format_ms, ReferenceColumns};

use crate::autotune::{check_repeats, DEFAULT_BUDGET, DEFAULT_LANE_CAP};
use crate::error::{Error, Result};
use crate::kernels::{parse_pair, Schedule};
use crate::scalar::ScalarKind;

/// A schedule column of the benchmark table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchSchedule {
    Pep,
    Ptp,
    Prob,
    Prwb,
    /// PRWB with the lane count chosen by the auto-tuner.
    PrwbTuned,
}

impl BenchSchedule {
    pub const ALL: [BenchSchedule; 5] =
        [BenchSchedule::Pep, BenchSchedule::Ptp, BenchSchedule::Prob, BenchSchedule::Prwb, BenchSchedule::PrwbTuned];

    pub fn label(self) -> &'static str {
        match self {
            BenchSchedule::Pep => "PEP",
            BenchSchedule::Ptp => "PTP",
            BenchSchedule::Prob => "PROB",
            BenchSchedule::Prwb => "PRWB",
            BenchSchedule::PrwbTuned => "PRWB+AT",
        }
    }
}

impl fmt::Display for BenchSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BenchSchedule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pep" => Ok(BenchSchedule::Pep),
            "ptp" => Ok(BenchSchedule::Ptp),
            "prob" => Ok(BenchSchedule::Prob),
            "prwb" => Ok(BenchSchedule::Prwb),
            "prwb+at" => Ok(BenchSchedule::PrwbTuned),
            other => Err(format!("unknown schedule '{other}' (expected pep, ptp, prob, prwb, prwb+at)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            other => Err(format!("unknown format '{other}' (expected md or csv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub shapes: Vec<(usize, usize, usize)>,
    /// Square blocks: `b_r = b_c`.
    pub block_sizes: Vec<usize>,
    pub sparsities: Vec<f64>,
    pub schedules: Vec<BenchSchedule>,
    /// PTP tile `(rows, cols)`.
    pub tile: (usize, usize),
    /// PRWB lane count; `None` uses the block size.
    pub lanes: Option<usize>,
    pub seed: u64,
    pub repeats: usize,
    pub warmup: usize,
    pub kind: ScalarKind,
    pub format: TableFormat,
    /// Trial budget for `prwb+at`.
    pub budget: usize,
    pub lane_cap: usize,
}

impl Default for BenchConfig {
    /// The 4 x 3 x 3 grid of shapes, block sizes and sparsities.
    fn default() -> Self {
        BenchConfig {
            shapes: vec![(1, 128, 768), (8, 128, 768), (1, 1024, 1024), (8, 1024, 1024)],
            block_sizes: vec![8, 16, 32],
            sparsities: vec![0.8, 0.85, 0.95],
            schedules: BenchSchedule::ALL.to_vec(),
            tile: (1, 8),
            lanes: None,
            seed: 0,
            repeats: 11,
            warmup: 3,
            kind: ScalarKind::F32,
            format: TableFormat::Markdown,
            budget: DEFAULT_BUDGET,
            lane_cap: DEFAULT_LANE_CAP,
        }
    }
}

fn parse_list<T>(value: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(s).map_err(Error::Config))
        .collect()
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

/// Parses `MxKxN`.
pub fn parse_shape(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    match parts.as_slice() {
        [m, k, n] => {
            let num = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad shape '{s}'"));
            Ok((num(m)?, num(k)?, num(n)?))
        }
        _ => Err(format!("expected MxKxN, got '{s}'")),
    }
}

impl BenchConfig {
    /// Sets one field from its textual form; keys match the CLI flag names.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "shapes" => self.shapes = parse_list(value, parse_shape)?,
            "blocks" => self.block_sizes = parse_list(value, |s| s.parse().map_err(|_| format!("bad block '{s}'")))?,
            "sparsities" => {
                self.sparsities = parse_list(value, |s| s.parse().map_err(|_| format!("bad sparsity '{s}'")))?
            }
            "schedules" => self.schedules = parse_list(value, BenchSchedule::from_str)?,
            "tile" => self.tile = parse_pair(value).map_err(Error::Config)?,
            "lanes" => self.lanes = Some(parse_num(key, value)?),
            "seed" => self.seed = parse_num(key, value)?,
            "repeats" => self.repeats = parse_num(key, value)?,
            "warmup" => self.warmup = parse_num(key, value)?,
            "kind" => self.kind = value.parse().map_err(Error::Config)?,
            "format" => self.format = value.parse().map_err(Error::Config)?,
            "budget" => self.budget = parse_num(key, value)?,
            "cap" => self.lane_cap = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a config file: one flat JSON object whose keys are flag names.
    /// Values may be strings, numbers or arrays (joined with commas).
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        for (key, value) in &map {
            self.apply(key, &value_text(value))?;
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.shapes.len() * self.block_sizes.len() * self.sparsities.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() || self.block_sizes.is_empty() || self.sparsities.is_empty() {
            return Err(Error::Config("shapes, blocks and sparsities must be non-empty".into()));
        }
        if self.schedules.is_empty() {
            return Err(Error::Config("no schedules selected".into()));
        }
        check_repeats(self.repeats)?;
        if let Some(&s) = self.sparsities.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Config(format!("sparsity {s} outside [0, 1]")));
        }
        Schedule::Ptp { tile_rows: self.tile.0, tile_cols: self.tile.1 }
            .check(1)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.budget == 0 || self.lane_cap == 0 {
            return Err(Error::Config("budget and cap must be >= 1".into()));
        }
        for &(m, k, n) in &self.shapes {
            if m == 0 || k == 0 || n == 0 {
                return Err(Error::Config(format!("shape {m}x{k}x{n} has a zero dimension")));
            }
            for &b in &self.block_sizes {
                if b == 0 || k % b != 0 || n % b != 0 {
                    return Err(Error::Config(format!("block size {b} does not divide shape {m}x{k}x{n}")));
                }
            }
            if let Some(t) = self.lanes {
                if t == 0 || k % t != 0 {
                    return Err(Error::Config(format!("lane count {t} does not divide k={k}")));
                }
            }
        }
        Ok(())
    }
}

fn value_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Array(items) => items.iter().map(value_text).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}
