//! Schedules where one task owns whole output elements: per-element (PEP)
//! and per-tile (PTP).

use rayon::prelude::*;

use super::{check_operands, Exec};
use crate::bsr::BsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `Y[i, j]` with a single accumulator: stored blocks of block row `j / b_r`
/// in index order, columns left to right inside each block.
#[inline]
pub(crate) fn element<T: Scalar>(x: &DenseMatrix<T>, w: &BsrMatrix<T>, i: usize, j: usize) -> T {
    let b_r = w.block_rows_dim();
    let b_c = w.block_cols_dim();
    let (br, r) = (j / b_r, j % b_r);
    let xrow = x.row(i);
    let mut acc = T::ZERO;
    for p in w.row_range(br) {
        let start = w.block_indices()[p] * b_c;
        let wrow = w.block_row_slice(p, r);
        for (&wv, &xv) in wrow.iter().zip(&xrow[start..start + b_c]) {
            acc += wv * xv;
        }
    }
    acc
}

pub fn spmm_pep_on<T: Scalar>(exec: &Exec, x: &DenseMatrix<T>, w: &BsrMatrix<T>) -> Result<DenseMatrix<T>> {
    check_operands(x, w)?;
    let (m, n) = (x.rows(), w.n());
    let data = exec.fill_elements(m, n, || (), |_, i, j| element(x, w, i, j));
    DenseMatrix::new(m, n, data)
}

pub fn spmm_pep<T: Scalar>(x: &DenseMatrix<T>, w: &BsrMatrix<T>) -> Result<DenseMatrix<T>> {
    spmm_pep_on(&Exec::global(), x, w)
}

/// One task per `tile_rows x tile_cols` tile of `Y`; elements inside a tile
/// are computed sequentially in row-major order. Edge tiles may be smaller.
pub fn spmm_ptp_on<T: Scalar>(
    exec: &Exec,
    x: &DenseMatrix<T>,
    w: &BsrMatrix<T>,
    tile_rows: usize,
    tile_cols: usize,
) -> Result<DenseMatrix<T>> {
    check_operands(x, w)?;
    if tile_rows == 0 || tile_cols == 0 {
        return Err(Error::BadTile { rows: tile_rows, cols: tile_cols });
    }
    let (m, n) = (x.rows(), w.n());
    let tiles_down = m.div_ceil(tile_rows);
    let tiles_across = n.div_ceil(tile_cols);
    let tiles = tiles_down * tiles_across;
    let chunk = exec.chunk_len(tiles);

    let tile_bounds = |t: usize| {
        let (ti, tj) = (t / tiles_across, t % tiles_across);
        let rows = ti * tile_rows..((ti + 1) * tile_rows).min(m);
        let cols = tj * tile_cols..((tj + 1) * tile_cols).min(n);
        (rows, cols)
    };
    let results: Vec<Vec<T>> = exec.install(|| {
        (0..tiles)
            .into_par_iter()
            .with_min_len(chunk)
            .map(|t| {
                let (rows, cols) = tile_bounds(t);
                let mut out = Vec::with_capacity(rows.len() * cols.len());
                for i in rows {
                    for j in cols.clone() {
                        out.push(element(x, w, i, j));
                    }
                }
                out
            })
            .collect()
    });

    let mut y = vec![T::ZERO; m * n];
    for (t, vals) in results.into_iter().enumerate() {
        let (rows, cols) = tile_bounds(t);
        let width = cols.len();
        for (r, i) in rows.enumerate() {
            y[i * n + cols.start..i * n + cols.end].copy_from_slice(&vals[r * width..(r + 1) * width]);
        }
    }
    DenseMatrix::new(m, n, y)
}

pub fn spmm_ptp<T: Scalar>(
    x: &DenseMatrix<T>,
    w: &BsrMatrix<T>,
    tile_rows: usize,
    tile_cols: usize,
) -> Result<DenseMatrix<T>> {
    spmm_ptp_on(&Exec::global(), x, w, tile_rows, tile_cols)
}
