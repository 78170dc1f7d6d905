//! Schedules that split one output element across several lanes whose
//! partials are combined with [`tree_reduce`](super::tree_reduce).

use super::reduce::tree_reduce_in_place;
use super::{check_operands, Exec};
use crate::bsr::BsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maximum lanes per output element for the reduction-over-blocks schedule.
/// Rows with more block columns hand lane `p` the blocks `p, p + cap, ..`.
pub const PROB_LANE_CAP: usize = 256;

/// Parallel reduction over blocks (PROB).
///
/// Each output element gets one lane per block column (`k / b_c`, capped at
/// [`PROB_LANE_CAP`]). A lane is active only when its block column is stored
/// in the element's block row; idle lanes contribute exactly zero.
pub fn spmm_prob_on<T: Scalar>(exec: &Exec, x: &DenseMatrix<T>, w: &BsrMatrix<T>) -> Result<DenseMatrix<T>> {
    check_operands(x, w)?;
    let (m, n) = (x.rows(), w.n());
    let b_r = w.block_rows_dim();
    let b_c = w.block_cols_dim();
    let block_cols = w.block_cols();
    let lanes = block_cols.min(PROB_LANE_CAP);

    let data = exec.fill_elements(
        m,
        n,
        || Vec::with_capacity(lanes.next_power_of_two()),
        |partials: &mut Vec<T>, i, j| {
            let (br, r) = (j / b_r, j % b_r);
            let row_start = w.row_range(br).start;
            let row_cols = w.row_block_indices(br);
            let xrow = x.row(i);
            partials.clear();
            for lane in 0..lanes {
                let mut acc = T::ZERO;
                for bc in (lane..block_cols).step_by(PROB_LANE_CAP) {
                    if let Ok(pos) = row_cols.binary_search(&bc) {
                        let wrow = w.block_row_slice(row_start + pos, r);
                        for (&wv, &xv) in wrow.iter().zip(&xrow[bc * b_c..(bc + 1) * b_c]) {
                            acc += wv * xv;
                        }
                    }
                }
                partials.push(acc);
            }
            tree_reduce_in_place(partials)
        },
    );
    DenseMatrix::new(m, n, data)
}

pub fn spmm_prob<T: Scalar>(x: &DenseMatrix<T>, w: &BsrMatrix<T>) -> Result<DenseMatrix<T>> {
    spmm_prob_on(&Exec::global(), x, w)
}

/// Parallel reduction within blocks (PRWB) with `lanes` lanes per element.
///
/// Lane `l` walks every stored block of the row and accumulates block-local
/// columns `c` with `c % lanes == l`, so neighbouring lanes read neighbouring
/// elements. One accumulator per lane spans all blocks. Lanes `>= b_c` stay
/// idle. `lanes` must divide `k`.
pub fn spmm_prwb_on<T: Scalar>(
    exec: &Exec,
    x: &DenseMatrix<T>,
    w: &BsrMatrix<T>,
    lanes: usize,
) -> Result<DenseMatrix<T>> {
    check_operands(x, w)?;
    if lanes == 0 || !w.k().is_multiple_of(lanes) {
        return Err(Error::BadLaneCount { lanes, k: w.k() });
    }
    let (m, n) = (x.rows(), w.n());
    let b_r = w.block_rows_dim();
    let b_c = w.block_cols_dim();

    let data = exec.fill_elements(
        m,
        n,
        || Vec::with_capacity(lanes.next_power_of_two()),
        |partials: &mut Vec<T>, i, j| {
            let (br, r) = (j / b_r, j % b_r);
            let xrow = x.row(i);
            partials.clear();
            partials.resize(lanes, T::ZERO);
            for p in w.row_range(br) {
                let start = w.block_indices()[p] * b_c;
                let wrow = w.block_row_slice(p, r);
                let xseg = &xrow[start..start + b_c];
                if lanes >= b_c {
                    for ((acc, &wv), &xv) in partials.iter_mut().zip(wrow).zip(xseg) {
                        *acc += wv * xv;
                    }
                } else {
                    for (c, (&wv, &xv)) in wrow.iter().zip(xseg).enumerate() {
                        partials[c % lanes] += wv * xv;
                    }
                }
            }
            tree_reduce_in_place(partials)
        },
    );
    DenseMatrix::new(m, n, data)
}

pub fn spmm_prwb<T: Scalar>(x: &DenseMatrix<T>, w: &BsrMatrix<T>, lanes: usize) -> Result<DenseMatrix<T>> {
    spmm_prwb_on(&Exec::global(), x, w, lanes)
}
