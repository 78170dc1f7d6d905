use std::collections::HashMap;
use std::path::Path;

use super::suite::{BenchCell, Outcome};
use super::{BenchSchedule, TableFormat};
use crate::error::{Error, Result};

/// Static columns joined onto the table by `(m, k, n, block, sparsity)`,
/// e.g. published numbers of other libraries. Never measured here.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceColumns {
    pub names: Vec<String>,
    rows: HashMap<String, Vec<String>>,
}

fn cell_key(m: usize, k: usize, n: usize, block: usize, sparsity: f64) -> String {
    format!("{m}x{k}x{n}/{block}/{sparsity}")
}

impl ReferenceColumns {
    /// CSV with header `m,k,n,block,sparsity,<name>...`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        let fixed = ["m", "k", "n", "block", "sparsity"];
        if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h.trim() != f) {
            return Err(Error::Format(format!("reference CSV must start with columns {}", fixed.join(","))));
        }
        let names = header.iter().skip(fixed.len()).map(|s| s.trim().to_string()).collect();
        let mut rows = HashMap::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let num = |i: usize| -> Result<usize> {
                rec[i].trim().parse().map_err(|_| Error::Format(format!("bad integer '{}'", &rec[i])))
            };
            let sparsity: f64 =
                rec[4].trim().parse().map_err(|_| Error::Format(format!("bad sparsity '{}'", &rec[4])))?;
            let key = cell_key(num(0)?, num(1)?, num(2)?, num(3)?, sparsity);
            rows.insert(key, rec.iter().skip(fixed.len()).map(|s| s.trim().to_string()).collect());
        }
        Ok(ReferenceColumns { names, rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    fn values(&self, cell: &BenchCell) -> Vec<String> {
        let row = self.rows.get(&cell_key(cell.m, cell.k, cell.n, cell.block, cell.sparsity));
        (0..self.names.len()).map(|i| row.and_then(|r| r.get(i)).cloned().unwrap_or_default()).collect()
    }
}

/// Milliseconds rounded to three significant digits.
pub fn format_ms(ms: f64) -> String {
    if ms == 0.0 || !ms.is_finite() {
        return format!("{ms}");
    }
    let scale = |v: f64| v.abs().log10().floor() as i32;
    let step = 10f64.powi(scale(ms) - 2);
    let rounded = (ms / step).round() * step;
    let decimals = (2 - scale(rounded)).max(0) as usize;
    format!("{rounded:.decimals$}")
}

fn schedule_columns(cells: &[BenchCell]) -> Vec<BenchSchedule> {
    let mut cols = Vec::new();
    for c in cells {
        for r in &c.results {
            if !cols.contains(&r.schedule) {
                cols.push(r.schedule);
            }
        }
    }
    cols
}

/// Renders one row per cell: coordinates, one timing column per schedule
/// (`FAIL` when verification failed), the tuned lane count and any
/// reference columns.
pub fn emit_table(cells: &[BenchCell], format: TableFormat, reference: Option<&ReferenceColumns>) -> String {
    let schedules = schedule_columns(cells);
    let ref_names: &[String] = reference.map_or(&[], |r| &r.names);
    match format {
        TableFormat::Markdown => markdown(cells, &schedules, reference, ref_names),
        TableFormat::Csv => csv_table(cells, &schedules, reference, ref_names),
    }
}

fn markdown(
    cells: &[BenchCell],
    schedules: &[BenchSchedule],
    reference: Option<&ReferenceColumns>,
    ref_names: &[String],
) -> String {
    let mut header = vec!["(m, k, n)".to_string(), "B".into(), "sparsity".into()];
    header.extend(schedules.iter().map(|s| s.label().to_string()));
    header.push("t".into());
    header.extend(ref_names.iter().cloned());
    let mut out = format!("| {} |\n", header.join(" | "));
    let align: Vec<&str> = (0..header.len()).map(|i| if i == 0 { ":---" } else { "---:" }).collect();
    out.push_str(&format!("| {} |\n", align.join(" | ")));
    for c in cells {
        let mut row = vec![format!("({}, {}, {})", c.m, c.k, c.n), c.block.to_string(), c.sparsity.to_string()];
        for &s in schedules {
            row.push(match c.outcome(s) {
                Some(Outcome::Verified { stats, .. }) => format_ms(stats.median_ms()),
                Some(Outcome::Failed(_)) => "FAIL".into(),
                None => "-".into(),
            });
        }
        row.push(c.chosen_lanes.map_or("-".into(), |t| t.to_string()));
        if let Some(r) = reference {
            row.extend(r.values(c));
        }
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

fn csv_table(
    cells: &[BenchCell],
    schedules: &[BenchSchedule],
    reference: Option<&ReferenceColumns>,
    ref_names: &[String],
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["m", "k", "n", "block", "sparsity", "nnzb"].map(String::from).to_vec();
    for s in schedules {
        header.push(format!("{}_ms", s.label()));
        header.push(format!("{}_median_ns", s.label()));
        header.push(format!("{}_min_ns", s.label()));
    }
    header.push("t".into());
    header.extend(ref_names.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for c in cells {
        let mut row = vec![
            c.m.to_string(),
            c.k.to_string(),
            c.n.to_string(),
            c.block.to_string(),
            c.sparsity.to_string(),
            c.nnzb.to_string(),
        ];
        for &s in schedules {
            match c.outcome(s) {
                Some(Outcome::Verified { stats, .. }) => {
                    row.push(format_ms(stats.median_ms()));
                    row.push(stats.median_ns.to_string());
                    row.push(stats.min_ns.to_string());
                }
                Some(Outcome::Failed(_)) => row.extend(["FAIL".into(), String::new(), String::new()]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        row.push(c.chosen_lanes.map_or(String::new(), |t| t.to_string()));
        if let Some(r) = reference {
            row.extend(r.values(c));
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to vec")).expect("utf-8 csv")
}
