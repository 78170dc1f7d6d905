//! Sparse-dense multiplication `Y = X * W_B^T` under four work decompositions.
//!
//! A GPU thread block maps to a logical work group and a GPU thread to a
//! lane. Lanes run sequentially inside their group on one CPU worker; what
//! the schedules fix is the reduction order, so every output bit is
//! independent of worker count and task interleaving. Groups (output
//! elements, or tiles for PTP) are dispatched in contiguous chunks to a
//! rayon pool.

mod elementwise;
mod reduce;
mod reduction;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::bsr::BsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::io::{AnyBsr, AnyDense};
use crate::scalar::Scalar;

pub use elementwise::{spmm_pep, spmm_pep_on, spmm_ptp, spmm_ptp_on};
pub use reduce::tree_reduce;
pub use reduction::{spmm_prob, spmm_prob_on, spmm_prwb, spmm_prwb_on, PROB_LANE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    Pep,
    Ptp,
    Prob,
    Prwb,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Pep => "pep",
            ScheduleKind::Ptp => "ptp",
            ScheduleKind::Prob => "prob",
            ScheduleKind::Prwb => "prwb",
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pep" => Ok(ScheduleKind::Pep),
            "ptp" => Ok(ScheduleKind::Ptp),
            "prob" => Ok(ScheduleKind::Prob),
            "prwb" => Ok(ScheduleKind::Prwb),
            other => Err(format!("unknown schedule '{other}'")),
        }
    }
}

/// Kernel strategy plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Schedule {
    /// One task per output element.
    Pep,
    /// One task per tile of the output.
    Ptp { tile_rows: usize, tile_cols: usize },
    /// One lane per block column; lane count fixed at `k / b_c`.
    Prob,
    /// A fixed number of lanes striding through each stored block.
    Prwb { lanes: usize },
}

impl Schedule {
    pub fn kind(&self) -> ScheduleKind {
        match self {
            Schedule::Pep => ScheduleKind::Pep,
            Schedule::Ptp { .. } => ScheduleKind::Ptp,
            Schedule::Prob => ScheduleKind::Prob,
            Schedule::Prwb { .. } => ScheduleKind::Prwb,
        }
    }

    pub fn lanes(&self) -> Option<usize> {
        match *self {
            Schedule::Prwb { lanes } => Some(lanes),
            _ => None,
        }
    }

    pub fn tile(&self) -> Option<(usize, usize)> {
        match *self {
            Schedule::Ptp { tile_rows, tile_cols } => Some((tile_rows, tile_cols)),
            _ => None,
        }
    }

    /// Rejects parameters that cannot run against a weight with `k` columns.
    pub fn check(&self, k: usize) -> Result<()> {
        match *self {
            Schedule::Ptp { tile_rows, tile_cols } if tile_rows == 0 || tile_cols == 0 => {
                Err(Error::BadTile { rows: tile_rows, cols: tile_cols })
            }
            Schedule::Prwb { lanes } if lanes == 0 || !k.is_multiple_of(lanes) => Err(Error::BadLaneCount { lanes, k }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Pep => f.write_str("pep"),
            Schedule::Ptp { tile_rows, tile_cols } => write!(f, "ptp:{tile_rows}x{tile_cols}"),
            Schedule::Prob => f.write_str("prob"),
            Schedule::Prwb { lanes } => write!(f, "prwb:{lanes}"),
        }
    }
}

impl FromStr for Schedule {
    type Err = String;

    /// `pep`, `prob`, `ptp:RxC`, `prwb:T`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        match (name.parse::<ScheduleKind>()?, arg) {
            (ScheduleKind::Pep, None) => Ok(Schedule::Pep),
            (ScheduleKind::Prob, None) => Ok(Schedule::Prob),
            (ScheduleKind::Ptp, Some(tile)) => {
                let (tile_rows, tile_cols) = parse_pair(tile)?;
                Ok(Schedule::Ptp { tile_rows, tile_cols })
            }
            (ScheduleKind::Prwb, Some(t)) => {
                let lanes = t.parse().map_err(|_| format!("bad lane count '{t}'"))?;
                Ok(Schedule::Prwb { lanes })
            }
            _ => Err(format!("bad schedule '{s}' (expected pep, prob, ptp:RxC or prwb:T)")),
        }
    }
}

/// Parses `RxC`.
pub fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected RxC, got '{s}'"))?;
    let a = a.trim().parse().map_err(|_| format!("bad number in '{s}'"))?;
    let b = b.trim().parse().map_err(|_| format!("bad number in '{s}'"))?;
    Ok((a, b))
}

/// Where kernel work groups run: the global rayon pool or a dedicated one.
#[derive(Clone, Default)]
pub struct Exec {
    pool: Option<Arc<rayon::ThreadPool>>,
    chunk: Option<usize>,
}

impl fmt::Debug for Exec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Exec").field("workers", &self.workers()).field("chunk", &self.chunk).finish()
    }
}

impl Exec {
    pub fn global() -> Self {
        Exec::default()
    }

    pub fn with_workers(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Pool(e.to_string()))?;
        Ok(Exec { pool: Some(Arc::new(pool)), chunk: None })
    }

    /// Overrides the number of groups handed to a worker at once.
    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = Some(chunk.max(1));
        self
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or_else(rayon::current_num_threads, |p| p.current_num_threads())
    }

    /// Default: `ceil(groups / (8 * workers))`.
    pub fn chunk_len(&self, groups: usize) -> usize {
        self.chunk.unwrap_or_else(|| groups.div_ceil(8 * self.workers())).max(1)
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    /// Computes an `m x n` row-major output, one group per element. `scratch`
    /// builds per-chunk state reused across the chunk's elements.
    pub(crate) fn fill_elements<T, S>(
        &self,
        m: usize,
        n: usize,
        scratch: impl Fn() -> S + Sync,
        element: impl Fn(&mut S, usize, usize) -> T + Sync,
    ) -> Vec<T>
    where
        T: Scalar,
    {
        let mut y = vec![T::ZERO; m * n];
        let chunk = self.chunk_len(m * n);
        self.install(|| {
            y.par_chunks_mut(chunk).enumerate().for_each(|(c, out)| {
                let mut state = scratch();
                let base = c * chunk;
                for (o, slot) in out.iter_mut().enumerate() {
                    let g = base + o;
                    *slot = element(&mut state, g / n, g % n);
                }
            })
        });
        y
    }
}

pub(crate) fn check_operands<T: Scalar>(x: &DenseMatrix<T>, w: &BsrMatrix<T>) -> Result<()> {
    if x.cols() != w.k() {
        return Err(Error::ShapeMismatch(format!(
            "X has {} columns but W_B has k = {}",
            x.cols(),
            w.k()
        )));
    }
    Ok(())
}

/// Validates the schedule parameters, then runs it.
pub fn run_schedule_on<T: Scalar>(
    exec: &Exec,
    x: &DenseMatrix<T>,
    w: &BsrMatrix<T>,
    schedule: Schedule,
) -> Result<DenseMatrix<T>> {
    check_operands(x, w)?;
    schedule.check(w.k())?;
    match schedule {
        Schedule::Pep => spmm_pep_on(exec, x, w),
        Schedule::Ptp { tile_rows, tile_cols } => spmm_ptp_on(exec, x, w, tile_rows, tile_cols),
        Schedule::Prob => spmm_prob_on(exec, x, w),
        Schedule::Prwb { lanes } => spmm_prwb_on(exec, x, w, lanes),
    }
}

pub fn run_schedule<T: Scalar>(x: &DenseMatrix<T>, w: &BsrMatrix<T>, schedule: Schedule) -> Result<DenseMatrix<T>> {
    run_schedule_on(&Exec::global(), x, w, schedule)
}

/// Runs a schedule on operands of runtime-determined kind; kinds must agree.
pub fn run_schedule_any(exec: &Exec, x: &AnyDense, w: &AnyBsr, schedule: Schedule) -> Result<AnyDense> {
    match (x, w) {
        (AnyDense::F32(x), AnyBsr::F32(w)) => run_schedule_on(exec, x, w, schedule).map(AnyDense::F32),
        (AnyDense::F64(x), AnyBsr::F64(w)) => run_schedule_on(exec, x, w, schedule).map(AnyDense::F64),
        _ => Err(Error::KindMismatch { left: x.kind(), right: w.kind() }),
    }
}
