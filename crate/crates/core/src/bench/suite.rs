use super::{BenchConfig, BenchSchedule};
use crate::autotune::{candidate_lanes, tune, RecordMeta, TuneOptions, TuningRecord};
use crate::bsr::BsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::gen::{counter_bits, generate_bsr, generate_dense, GenSpec, ValueMode};
use crate::io::{encode_bsr, encode_dense};
use crate::kernels::{run_schedule_on, Exec, Schedule};
use crate::oracle::Reference;
use crate::scalar::{Scalar, ScalarKind};
use crate::timing::{measure, TimingStats};

const CELL_STREAM: u64 = 21;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Verified { stats: TimingStats, max_scaled_err: f64 },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutcome {
    pub schedule: BenchSchedule,
    pub outcome: Outcome,
}

/// One `(shape, block, sparsity)` coordinate of the grid and its results.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub index: usize,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub block: usize,
    pub sparsity: f64,
    pub nnzb: usize,
    /// FNV-1a over the serialized `W` and `X` of this cell.
    pub input_digest: u64,
    pub results: Vec<ScheduleOutcome>,
    /// Lane count picked by the tuner, when `prwb+at` ran.
    pub chosen_lanes: Option<usize>,
    pub tuning: Vec<TuningRecord>,
}

impl BenchCell {
    pub fn verified(&self) -> bool {
        self.results.iter().all(|r| matches!(r.outcome, Outcome::Verified { .. }))
    }

    pub fn outcome(&self, schedule: BenchSchedule) -> Option<&Outcome> {
        self.results.iter().find(|r| r.schedule == schedule).map(|r| &r.outcome)
    }

    pub fn median_ns(&self, schedule: BenchSchedule) -> Option<u64> {
        match self.outcome(schedule)? {
            Outcome::Verified { stats, .. } => Some(stats.median_ns),
            Outcome::Failed(_) => None,
        }
    }
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

pub fn run_suite(cfg: &BenchConfig) -> Result<Vec<BenchCell>> {
    run_suite_with(cfg, |_| {})
}

/// Runs every cell in grid order, calling `on_cell` as each finishes.
/// A verification failure marks that schedule `Failed` and the suite goes on.
pub fn run_suite_with(cfg: &BenchConfig, mut on_cell: impl FnMut(&BenchCell)) -> Result<Vec<BenchCell>> {
    cfg.validate()?;
    let mut cells = Vec::with_capacity(cfg.cell_count());
    let mut index = 0;
    for &(m, k, n) in &cfg.shapes {
        for &block in &cfg.block_sizes {
            for &sparsity in &cfg.sparsities {
                let cell = match cfg.kind {
                    ScalarKind::F32 => run_cell::<f32>(cfg, index, (m, k, n), block, sparsity)?,
                    ScalarKind::F64 => run_cell::<f64>(cfg, index, (m, k, n), block, sparsity)?,
                };
                on_cell(&cell);
                cells.push(cell);
                index += 1;
            }
        }
    }
    Ok(cells)
}

fn run_cell<T: Scalar>(
    cfg: &BenchConfig,
    index: usize,
    (m, k, n): (usize, usize, usize),
    block: usize,
    sparsity: f64,
) -> Result<BenchCell> {
    let w_seed = counter_bits(cfg.seed, CELL_STREAM, 2 * index as u64);
    let x_seed = counter_bits(cfg.seed, CELL_STREAM, 2 * index as u64 + 1);
    let spec = GenSpec { n, k, b_r: block, b_c: block, sparsity, seed: w_seed, value_mode: ValueMode::UniformReal };
    let w: BsrMatrix<T> = generate_bsr(&spec)?;
    let x: DenseMatrix<T> = generate_dense(m, k, x_seed, ValueMode::UniformReal)?;
    let reference = Reference::compute(&x, &w)?;
    let exec = Exec::global();

    let mut cell = BenchCell {
        index,
        m,
        k,
        n,
        block,
        sparsity,
        nnzb: w.nnzb(),
        input_digest: fnv1a(&[&encode_bsr(&w), &encode_dense(&x)]),
        results: Vec::with_capacity(cfg.schedules.len()),
        chosen_lanes: None,
        tuning: Vec::new(),
    };

    for &schedule in &cfg.schedules {
        let outcome = match schedule {
            BenchSchedule::PrwbTuned => {
                let opts = TuneOptions { budget: cfg.budget, repeats: cfg.repeats, plan_seed: w_seed, exec: exec.clone() };
                match tune(&x, &w, &candidate_lanes(k, cfg.lane_cap), &opts, &RecordMeta::new(sparsity, cfg.seed)) {
                    Ok(res) => {
                        let best = &res.best;
                        cell.chosen_lanes = Some(res.best_lanes());
                        let stats = TimingStats {
                            median_ns: best.median_ns,
                            min_ns: best.min_ns,
                            mean_ns: best.mean_ns,
                            repeats: best.repeats,
                        };
                        let max_scaled_err = reference.check(&run_schedule_on(&exec, &x, &w, best.schedule)?)?.max_scaled;
                        cell.tuning = res.all_trials;
                        Outcome::Verified { stats, max_scaled_err }
                    }
                    Err(e) => Outcome::Failed(e.to_string()),
                }
            }
            fixed => {
                let s = match fixed {
                    BenchSchedule::Pep => Schedule::Pep,
                    BenchSchedule::Ptp => Schedule::Ptp { tile_rows: cfg.tile.0, tile_cols: cfg.tile.1 },
                    BenchSchedule::Prob => Schedule::Prob,
                    _ => Schedule::Prwb { lanes: cfg.lanes.unwrap_or(block) },
                };
                time_schedule(&exec, &x, &w, s, &reference, cfg)
            }
        };
        cell.results.push(ScheduleOutcome { schedule, outcome });
    }
    Ok(cell)
}

fn time_schedule<T: Scalar>(
    exec: &Exec,
    x: &DenseMatrix<T>,
    w: &BsrMatrix<T>,
    schedule: Schedule,
    reference: &Reference<T>,
    cfg: &BenchConfig,
) -> Outcome {
    let deviation = match run_schedule_on(exec, x, w, schedule).and_then(|y| reference.check(&y)) {
        Ok(d) => d,
        Err(e) => return Outcome::Failed(e.to_string()),
    };
    if !deviation.within(crate::oracle::tolerance(T::KIND)) {
        return Outcome::Failed(format!("{schedule}: error {:.3e} exceeds tolerance", deviation.max_scaled));
    }
    let stats = measure(cfg.warmup, cfg.repeats, || {
        let y = run_schedule_on(exec, x, w, schedule).expect("verified schedule");
        std::hint::black_box(y);
    });
    Outcome::Verified { stats, max_scaled_err: deviation.max_scaled }
}

/// PEP medians of one `(shape, block)` slice, ordered by sparsity.
#[derive(Debug, Clone, PartialEq)]
pub struct Trend {
    pub points: Vec<(f64, u64)>,
}

impl Trend {
    /// Median time never rises as sparsity rises.
    pub fn non_increasing(&self) -> bool {
        self.points.windows(2).all(|p| p[1].1 <= p[0].1)
    }
}

pub fn pep_trend(cells: &[BenchCell], shape: (usize, usize, usize), block: usize) -> Trend {
    let mut points: Vec<(f64, u64)> = cells
        .iter()
        .filter(|c| (c.m, c.k, c.n) == shape && c.block == block)
        .filter_map(|c| Some((c.sparsity, c.median_ns(BenchSchedule::Pep)?)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    Trend { points }
}
