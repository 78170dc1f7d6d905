//! Direct-search auto-tuning of the PRWB lane count.
//!
//! Candidates are the divisors of `k` up to a lane cap. Each chosen candidate
//! is first verified against the dense reference, then timed (one warmup run
//! plus an odd number of timed runs); the lowest median wins, ties going to
//! the smaller lane count.

mod records;

pub use records::{load_records, parse_records, save_records, LoadedRecords, RecordError, TuningRecord};

use crate::bsr::{BsrMatrix, ProblemShape};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::gen::counter_bits;
use crate::kernels::{spmm_prwb_on, Exec, Schedule};
use crate::oracle::Reference;
use crate::scalar::Scalar;
use crate::timing::measure;

/// Default upper bound on lane counts, analogous to a GPU thread-block limit.
pub const DEFAULT_LANE_CAP: usize = 1024;
/// Default maximum number of trials per search.
pub const DEFAULT_BUDGET: usize = 200;

const PLAN_STREAM: u64 = 11;

/// Ordered, deduplicated lane counts, each dividing `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    candidates: Vec<usize>,
}

impl SearchSpace {
    pub fn new(mut candidates: Vec<usize>, k: usize) -> Result<Self> {
        candidates.sort_unstable();
        candidates.dedup();
        if candidates.is_empty() {
            return Err(Error::Config("search space is empty".into()));
        }
        if let Some(&t) = candidates.iter().find(|&&t| t == 0 || !k.is_multiple_of(t)) {
            return Err(Error::BadLaneCount { lanes: t, k });
        }
        Ok(SearchSpace { candidates })
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// All divisors of `k` not exceeding `cap`, ascending.
pub fn candidate_lanes(k: usize, cap: usize) -> SearchSpace {
    let k = k.max(1);
    let cap = cap.max(1);
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= k {
        if k.is_multiple_of(d) {
            small.push(d);
            if d * d != k {
                large.push(k / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small.retain(|&t| t <= cap);
    SearchSpace { candidates: small }
}

/// Which candidates a search with `budget` trials evaluates, ascending.
///
/// Everything when the budget allows; otherwise the smallest and largest
/// candidates plus a seeded uniform sample of the rest.
pub fn search_plan(space: &SearchSpace, budget: usize, seed: u64) -> Vec<usize> {
    let c = space.candidates();
    if budget >= c.len() {
        return c.to_vec();
    }
    if budget <= 1 {
        return c[..budget].to_vec();
    }
    let mut middle: Vec<usize> = c[1..c.len() - 1].to_vec();
    let take = budget - 2;
    for i in 0..take {
        let bits = counter_bits(seed, PLAN_STREAM, i as u64);
        let j = i + ((bits as u128 * (middle.len() - i) as u128) >> 64) as usize;
        middle.swap(i, j);
    }
    let mut plan = vec![c[0], c[c.len() - 1]];
    plan.extend_from_slice(&middle[..take]);
    plan.sort_unstable();
    plan
}

#[derive(Debug, Clone)]
pub struct TuneOptions {
    pub budget: usize,
    /// Timed runs per trial; odd and at least 3.
    pub repeats: usize,
    /// Seeds the subsample when the budget is smaller than the space.
    pub plan_seed: u64,
    pub exec: Exec,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions { budget: DEFAULT_BUDGET, repeats: 11, plan_seed: 0, exec: Exec::global() }
    }
}

/// Descriptive fields copied into every record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordMeta {
    pub sparsity: f64,
    pub seed: u64,
    pub env: String,
}

impl RecordMeta {
    pub fn new(sparsity: f64, seed: u64) -> Self {
        RecordMeta { sparsity, seed, env: environment_tag() }
    }
}

/// OS, architecture and worker count of this process.
pub fn environment_tag() -> String {
    format!("{}-{} workers={}", std::env::consts::OS, std::env::consts::ARCH, rayon::current_num_threads())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: TuningRecord,
    pub all_trials: Vec<TuningRecord>,
    pub budget_used: usize,
}

impl TuneResult {
    pub fn best_lanes(&self) -> usize {
        self.best.schedule.lanes().expect("tuned schedule is prwb")
    }
}

pub fn check_repeats(repeats: usize) -> Result<()> {
    if repeats < 3 || repeats.is_multiple_of(2) {
        return Err(Error::Config(format!("repeats must be odd and >= 3, got {repeats}")));
    }
    Ok(())
}

pub fn tune<T: Scalar>(
    x: &DenseMatrix<T>,
    w: &BsrMatrix<T>,
    space: &SearchSpace,
    opts: &TuneOptions,
    meta: &RecordMeta,
) -> Result<TuneResult> {
    if opts.budget == 0 {
        return Err(Error::Config("budget must be >= 1".into()));
    }
    check_repeats(opts.repeats)?;
    let shape = ProblemShape::new(x.rows(), w.k(), w.n(), w.block_rows_dim(), w.block_cols_dim())?;
    if x.cols() != w.k() {
        return Err(Error::ShapeMismatch(format!("X has {} columns, k = {}", x.cols(), w.k())));
    }
    let plan = search_plan(space, opts.budget, opts.plan_seed);
    let reference = Reference::compute(x, w)?;

    let mut trials = Vec::with_capacity(plan.len());
    for &lanes in &plan {
        let verified = match spmm_prwb_on(&opts.exec, x, w, lanes) {
            Ok(y) => reference.accepts(&y)?,
            Err(_) => false,
        };
        let stats = verified.then(|| {
            measure(1, opts.repeats, || {
                let y = spmm_prwb_on(&opts.exec, x, w, lanes).expect("verified schedule");
                std::hint::black_box(y);
            })
        });
        trials.push(TuningRecord {
            shape,
            sparsity: meta.sparsity,
            seed: meta.seed,
            schedule: Schedule::Prwb { lanes },
            median_ns: stats.map_or(0, |s| s.median_ns),
            min_ns: stats.map_or(0, |s| s.min_ns),
            mean_ns: stats.map_or(0, |s| s.mean_ns),
            repeats: opts.repeats,
            timestamp: chrono::Utc::now().to_rfc3339(),
            env: meta.env.clone(),
            valid: verified,
        });
    }

    let best = trials
        .iter()
        .filter(|r| r.valid)
        .min_by_key(|r| (r.median_ns, r.schedule.lanes()))
        .cloned()
        .ok_or(Error::NoValidCandidate)?;
    Ok(TuneResult { best, budget_used: trials.len(), all_trials: trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate_bsr, generate_dense, GenSpec, ValueMode};

    #[test]
    fn divisors_of_128() {
        assert_eq!(candidate_lanes(128, 1024).candidates(), &[1, 2, 4, 8, 16, 32, 64, 128]);
    }

    #[test]
    fn divisors_with_cap() {
        assert_eq!(candidate_lanes(1, 5).candidates(), &[1]);
        assert_eq!(candidate_lanes(12, 6).candidates(), &[1, 2, 3, 4, 6]);
        assert_eq!(candidate_lanes(36, 1024).candidates(), &[1, 2, 3, 4, 6, 9, 12, 18, 36]);
    }

    #[test]
    fn space_rejects_non_divisors() {
        assert!(matches!(SearchSpace::new(vec![3], 8), Err(Error::BadLaneCount { .. })));
        assert!(SearchSpace::new(vec![], 8).is_err());
        assert_eq!(SearchSpace::new(vec![4, 1, 4], 8).unwrap().candidates(), &[1, 4]);
    }

    #[test]
    fn plan_keeps_endpoints_under_budget() {
        let space = candidate_lanes(128, 1024);
        let plan = search_plan(&space, 2, 3);
        assert_eq!(plan, vec![1, 128]);
        let plan = search_plan(&space, 5, 3);
        assert_eq!(plan.len(), 5);
        assert_eq!((plan[0], plan[4]), (1, 128));
        assert!(plan.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(plan, search_plan(&space, 5, 3));
        assert_eq!(search_plan(&space, 500, 3), space.candidates());
        assert_eq!(search_plan(&space, 1, 3), vec![1]);
    }

    fn operands() -> (DenseMatrix<f64>, BsrMatrix<f64>) {
        let spec = GenSpec { n: 16, k: 12, b_r: 4, b_c: 4, sparsity: 0.5, seed: 4, value_mode: ValueMode::UniformReal };
        (generate_dense(2, 12, 5, ValueMode::UniformReal).unwrap(), generate_bsr(&spec).unwrap())
    }

    #[test]
    fn best_trial_has_minimal_median() {
        let (x, w) = operands();
        let space = candidate_lanes(12, 1024);
        let opts = TuneOptions { repeats: 3, ..Default::default() };
        let res = tune(&x, &w, &space, &opts, &RecordMeta::new(0.5, 4)).unwrap();
        assert_eq!(res.all_trials.len(), 6);
        assert_eq!(res.budget_used, 6);
        assert!(res.all_trials.iter().all(|r| r.valid && r.min_ns <= r.median_ns));
        let min = res.all_trials.iter().map(|r| r.median_ns).min().unwrap();
        assert_eq!(res.best.median_ns, min);
        let tied_smallest = res.all_trials.iter().find(|r| r.median_ns == min).unwrap();
        assert_eq!(res.best, *tied_smallest);
    }

    #[test]
    fn singleton_space() {
        let (x, w) = operands();
        let space = SearchSpace::new(vec![1], 12).unwrap();
        let opts = TuneOptions { repeats: 3, budget: 7, ..Default::default() };
        let res = tune(&x, &w, &space, &opts, &RecordMeta::new(0.5, 4)).unwrap();
        assert_eq!(res.best_lanes(), 1);
    }

    #[test]
    fn nan_inputs_leave_no_valid_candidate() {
        let (x, w) = operands();
        let x = x.map(|_| f64::NAN);
        let opts = TuneOptions { repeats: 3, ..Default::default() };
        let err = tune(&x, &w, &candidate_lanes(12, 4), &opts, &RecordMeta::new(0.5, 4)).unwrap_err();
        assert!(matches!(err, Error::NoValidCandidate));
    }

    #[test]
    fn repeats_must_be_odd() {
        let (x, w) = operands();
        for repeats in [1, 4] {
            let opts = TuneOptions { repeats, ..Default::default() };
            assert!(tune(&x, &w, &candidate_lanes(12, 4), &opts, &RecordMeta::new(0.5, 4)).is_err());
        }
        let opts = TuneOptions { repeats: 3, budget: 0, ..Default::default() };
        assert!(tune(&x, &w, &candidate_lanes(12, 4), &opts, &RecordMeta::new(0.5, 4)).is_err());
    }
}
