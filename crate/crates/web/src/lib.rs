//! Browser bindings: sparsity pattern, schedule comparison and a lane sweep.
//!
//! Each exported function returns JSON (or raw bytes for the pattern) so the
//! page needs no glue beyond `wasm-bindgen`'s generated module.

use blocksparse::autotune::{candidate_lanes, DEFAULT_LANE_CAP};
use blocksparse::kernels::{run_schedule, Schedule};
use blocksparse::oracle::{tolerance, Reference};
use blocksparse::{generate_bsr, generate_dense, BsrMatrix, DenseMatrix, GenSpec, Scalar, ScalarKind, ValueMode};
use serde::Serialize;
use wasm_bindgen::prelude::*;

mod clock;

/// Problem parameters shared by every demo operation.
#[derive(Clone, Copy, Debug)]
pub struct Problem {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub block: usize,
    pub sparsity: f64,
    pub seed: u64,
}

impl Problem {
    fn spec(&self) -> GenSpec {
        GenSpec {
            n: self.n,
            k: self.k,
            b_r: self.block,
            b_c: self.block,
            sparsity: self.sparsity,
            seed: self.seed,
            value_mode: ValueMode::UniformReal,
        }
    }

    fn operands<T: Scalar>(&self) -> Result<(DenseMatrix<T>, BsrMatrix<T>), String> {
        let w = generate_bsr::<T>(&self.spec()).map_err(|e| e.to_string())?;
        let x = generate_dense::<T>(self.m, self.k, self.seed.wrapping_add(1), ValueMode::UniformReal)
            .map_err(|e| e.to_string())?;
        Ok((x, w))
    }
}

#[derive(Debug, Serialize)]
pub struct Pattern {
    pub block_rows: usize,
    pub block_cols: usize,
    pub nnzb: usize,
    /// Row-major occupancy, 1 for a stored block.
    pub cells: Vec<u8>,
}

pub fn pattern(p: &Problem) -> Result<Pattern, String> {
    let w = generate_bsr::<f32>(&p.spec()).map_err(|e| e.to_string())?;
    let (rows, cols) = (w.block_rows(), w.block_cols());
    let mut cells = vec![0u8; rows * cols];
    for r in 0..rows {
        for &c in w.row_block_indices(r) {
            cells[r * cols + c] = 1;
        }
    }
    Ok(Pattern { block_rows: rows, block_cols: cols, nnzb: w.nnzb(), cells })
}

#[derive(Debug, Serialize)]
pub struct ScheduleRun {
    pub schedule: String,
    pub ms: f64,
    pub error: f64,
    pub ok: bool,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub kind: String,
    pub nnzb: usize,
    pub tolerance: f64,
    pub runs: Vec<ScheduleRun>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[(xs.len() - 1) / 2]
}

fn timed<T: Scalar>(
    x: &DenseMatrix<T>,
    w: &BsrMatrix<T>,
    s: Schedule,
    repeats: usize,
    reference: &Reference<T>,
) -> Result<ScheduleRun, String> {
    let y = run_schedule(x, w, s).map_err(|e| e.to_string())?;
    let dev = reference.check(&y).map_err(|e| e.to_string())?;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let t0 = clock::now_ms();
        let y = run_schedule(x, w, s).map_err(|e| e.to_string())?;
        samples.push(clock::now_ms() - t0);
        std::hint::black_box(y);
    }
    Ok(ScheduleRun {
        schedule: s.to_string(),
        ms: median(samples),
        error: dev.max_scaled,
        ok: dev.within(tolerance(T::KIND)),
    })
}

fn compare_typed<T: Scalar>(p: &Problem, schedules: &[Schedule], repeats: usize) -> Result<Comparison, String> {
    let (x, w) = p.operands::<T>()?;
    let reference = Reference::compute(&x, &w).map_err(|e| e.to_string())?;
    let runs = schedules
        .iter()
        .map(|&s| timed(&x, &w, s, repeats, &reference))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Comparison { kind: T::KIND.to_string(), nnzb: w.nnzb(), tolerance: tolerance(T::KIND), runs })
}

/// Runs PEP, PTP, PROB and PRWB against the dense reference.
pub fn compare(p: &Problem, kind: ScalarKind, tile: (usize, usize), lanes: usize, repeats: usize) -> Result<Comparison, String> {
    let schedules = [
        Schedule::Pep,
        Schedule::Ptp { tile_rows: tile.0, tile_cols: tile.1 },
        Schedule::Prob,
        Schedule::Prwb { lanes },
    ];
    match kind {
        ScalarKind::F32 => compare_typed::<f32>(p, &schedules, repeats),
        ScalarKind::F64 => compare_typed::<f64>(p, &schedules, repeats),
    }
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub runs: Vec<ScheduleRun>,
    /// Lane count with the smallest median among verified runs; ties go to fewer lanes.
    pub best: Option<usize>,
}

/// Times PRWB for every lane count dividing k (up to the default cap).
pub fn lane_sweep(p: &Problem, repeats: usize) -> Result<Sweep, String> {
    let space = candidate_lanes(p.k, DEFAULT_LANE_CAP);
    let schedules: Vec<Schedule> = space.candidates().iter().map(|&lanes| Schedule::Prwb { lanes }).collect();
    let cmp = compare_typed::<f32>(p, &schedules, repeats)?;
    let best = cmp
        .runs
        .iter()
        .zip(space.candidates())
        .filter(|(r, _)| r.ok)
        .min_by(|(a, ta), (b, tb)| a.ms.total_cmp(&b.ms).then(ta.cmp(tb)))
        .map(|(_, &t)| t);
    Ok(Sweep { runs: cmp.runs, best })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

fn problem(m: usize, k: usize, n: usize, block: usize, sparsity: f64, seed: u32) -> Problem {
    Problem { m, k, n, block, sparsity, seed: u64::from(seed) }
}

#[wasm_bindgen(js_name = pattern)]
pub fn pattern_js(n: usize, k: usize, block: usize, sparsity: f64, seed: u32) -> Result<String, JsError> {
    to_js(pattern(&problem(1, k, n, block, sparsity, seed)))
}

#[wasm_bindgen(js_name = compareSchedules)]
#[allow(clippy::too_many_arguments)]
pub fn compare_js(
    m: usize,
    k: usize,
    n: usize,
    block: usize,
    sparsity: f64,
    seed: u32,
    kind: &str,
    tile: &str,
    lanes: usize,
    repeats: usize,
) -> Result<String, JsError> {
    let kind: ScalarKind = kind.parse().map_err(|e: String| JsError::new(&e))?;
    let tile = blocksparse::kernels::parse_pair(tile).map_err(|e| JsError::new(&e))?;
    to_js(compare(&problem(m, k, n, block, sparsity, seed), kind, tile, lanes, repeats))
}

#[wasm_bindgen(js_name = laneSweep)]
pub fn lane_sweep_js(
    m: usize,
    k: usize,
    n: usize,
    block: usize,
    sparsity: f64,
    seed: u32,
    repeats: usize,
) -> Result<String, JsError> {
    to_js(lane_sweep(&problem(m, k, n, block, sparsity, seed), repeats))
}
