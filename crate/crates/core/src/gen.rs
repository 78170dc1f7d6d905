//! Seeded generation of block-sparse weights and dense operands.
//!
//! Every draw is a pure function of `(seed, stream, counter)`, so output is
//! identical on every platform and independent of generation order.

use crate::bsr::BsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SLOT_STREAM: u64 = 1;
const BLOCK_VALUE_STREAM: u64 = 2;
const DENSE_VALUE_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueMode {
    /// Uniform on the open interval (-1, 1).
    UniformReal,
    /// Integers in -4..=4; exact in both f32 and f64.
    SmallInt,
}

impl std::str::FromStr for ValueMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "uniform" | "uniform_real" => Ok(ValueMode::UniformReal),
            "int" | "small_int" => Ok(ValueMode::SmallInt),
            other => Err(format!("unknown value mode '{other}' (expected uniform or int)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub k: usize,
    pub b_r: usize,
    pub b_c: usize,
    /// Fraction of zero blocks.
    pub sparsity: f64,
    pub seed: u64,
    pub value_mode: ValueMode,
}

impl GenSpec {
    pub fn block_slots(&self) -> usize {
        (self.n / self.b_r) * (self.k / self.b_c)
    }

    /// `round((1 - sparsity) * slots)`.
    pub fn stored_blocks(&self) -> usize {
        ((1.0 - self.sparsity) * self.block_slots() as f64).round() as usize
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::BadShape(format!("sparsity {} outside [0, 1]", self.sparsity)));
        }
        BsrMatrix::<f64>::empty(self.n, self.k, self.b_r, self.b_c).map(|_| ())
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless draw for `(seed, stream, counter)`.
pub fn counter_bits(seed: u64, stream: u64, counter: u64) -> u64 {
    let key = mix64(seed ^ mix64(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    mix64(key.wrapping_add(counter.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Unbiased-enough map of 64 bits onto `0..range` (multiply-high).
fn below(bits: u64, range: usize) -> usize {
    ((bits as u128 * range as u128) >> 64) as usize
}

fn draw<T: Scalar>(mode: ValueMode, bits: u64) -> T {
    match mode {
        ValueMode::UniformReal => T::from_unit_bits(bits),
        ValueMode::SmallInt => T::from_f64(below(bits, 9) as f64 - 4.0),
    }
}

/// Block-sparse matrix with exactly `spec.stored_blocks()` dense blocks at
/// positions chosen by a seeded Fisher-Yates shuffle of all block slots.
pub fn generate_bsr<T: Scalar>(spec: &GenSpec) -> Result<BsrMatrix<T>> {
    spec.check()?;
    let slots = spec.block_slots();
    let nnzb = spec.stored_blocks().min(slots);
    let block_cols = spec.k / spec.b_c;
    let bsz = spec.b_r * spec.b_c;

    // partial shuffle: only the first nnzb positions are needed
    let mut order: Vec<usize> = (0..slots).collect();
    for i in 0..nnzb {
        let j = i + below(counter_bits(spec.seed, SLOT_STREAM, i as u64), slots - i);
        order.swap(i, j);
    }
    let mut chosen = order[..nnzb].to_vec();
    chosen.sort_unstable();

    let mut index_pointer = vec![0usize; spec.n / spec.b_r + 1];
    let mut block_indices = Vec::with_capacity(nnzb);
    let mut block_data = Vec::with_capacity(nnzb * bsz);
    for &slot in &chosen {
        index_pointer[slot / block_cols + 1] += 1;
        block_indices.push(slot % block_cols);
        let base = (slot * bsz) as u64;
        block_data.extend(
            (0..bsz as u64).map(|e| draw::<T>(spec.value_mode, counter_bits(spec.seed, BLOCK_VALUE_STREAM, base + e))),
        );
    }
    for r in 1..index_pointer.len() {
        index_pointer[r] += index_pointer[r - 1];
    }
    BsrMatrix::from_raw(spec.n, spec.k, spec.b_r, spec.b_c, index_pointer, block_indices, block_data)
}

pub fn generate_dense<T: Scalar>(rows: usize, cols: usize, seed: u64, mode: ValueMode) -> Result<DenseMatrix<T>> {
    let data = (0..(rows * cols) as u64)
        .map(|i| draw::<T>(mode, counter_bits(seed, DENSE_VALUE_STREAM, i)))
        .collect();
    DenseMatrix::new(rows, cols, data)
}
