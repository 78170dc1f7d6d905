//! Block compressed row storage for the transposed weight matrix `W_B` (n x k).
//!
//! Three arrays describe the matrix:
//!
//! - `block_data`: the stored blocks, logically `[nnzb, b_r, b_c]`, each block row-major;
//! - `block_indices`: the block-column index of every stored block;
//! - `index_pointer`: for block row `r`, its blocks are `index_pointer[r]..index_pointer[r + 1]`.
//!
//! Block columns inside a block row are kept strictly increasing. Empty block
//! rows are legal.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dimensions of one `Y = X * W_B^T` problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProblemShape {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub b_r: usize,
    pub b_c: usize,
}

impl ProblemShape {
    pub fn new(m: usize, k: usize, n: usize, b_r: usize, b_c: usize) -> Result<Self> {
        let shape = ProblemShape { m, k, n, b_r, b_c };
        shape.check()?;
        Ok(shape)
    }

    pub fn check(&self) -> Result<()> {
        if [self.m, self.k, self.n, self.b_r, self.b_c].contains(&0) {
            return Err(Error::BadShape(format!("all dimensions must be positive: {self:?}")));
        }
        check_blocking(self.n, self.k, self.b_r, self.b_c)
    }
}

fn check_blocking(n: usize, k: usize, b_r: usize, b_c: usize) -> Result<()> {
    if b_r == 0 || b_c == 0 || n == 0 || k == 0 {
        return Err(Error::BadShape(format!(
            "dimensions must be positive: n={n} k={k} b_r={b_r} b_c={b_c}"
        )));
    }
    if !n.is_multiple_of(b_r) {
        return Err(Error::BadShape(format!("block rows {b_r} do not divide n={n}")));
    }
    if !k.is_multiple_of(b_c) {
        return Err(Error::BadShape(format!("block cols {b_c} do not divide k={k}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsrMatrix<T> {
    n: usize,
    k: usize,
    b_r: usize,
    b_c: usize,
    index_pointer: Vec<usize>,
    block_indices: Vec<usize>,
    block_data: Vec<T>,
}

impl<T: Scalar> BsrMatrix<T> {
    /// Assembles a matrix from its raw arrays, rejecting anything `validate` would.
    pub fn from_raw(
        n: usize,
        k: usize,
        b_r: usize,
        b_c: usize,
        index_pointer: Vec<usize>,
        block_indices: Vec<usize>,
        block_data: Vec<T>,
    ) -> Result<Self> {
        let w = BsrMatrix { n, k, b_r, b_c, index_pointer, block_indices, block_data };
        w.validate()?;
        Ok(w)
    }

    /// A matrix with no stored blocks.
    pub fn empty(n: usize, k: usize, b_r: usize, b_c: usize) -> Result<Self> {
        check_blocking(n, k, b_r, b_c)?;
        Self::from_raw(n, k, b_r, b_c, vec![0; n / b_r + 1], Vec::new(), Vec::new())
    }

    /// Checks every structural invariant and reports the first one violated.
    pub fn validate(&self) -> Result<()> {
        check_blocking(self.n, self.k, self.b_r, self.b_c)?;
        let block_rows = self.n / self.b_r;
        let block_cols = self.k / self.b_c;
        let nnzb = self.block_indices.len();

        if self.index_pointer.len() != block_rows + 1 {
            return Err(Error::BadShape(format!(
                "index_pointer has length {}, expected {}",
                self.index_pointer.len(),
                block_rows + 1
            )));
        }
        if self.index_pointer[0] != 0 {
            return Err(Error::BadPointer(format!(
                "index_pointer[0] = {}, expected 0",
                self.index_pointer[0]
            )));
        }
        if let Some(r) = self.index_pointer.windows(2).position(|p| p[0] > p[1]) {
            return Err(Error::BadPointer(format!(
                "index_pointer decreases at block row {r}: {} > {}",
                self.index_pointer[r],
                self.index_pointer[r + 1]
            )));
        }
        if self.index_pointer[block_rows] != nnzb {
            return Err(Error::BadPointer(format!(
                "last index_pointer entry {} != number of blocks {nnzb}",
                self.index_pointer[block_rows]
            )));
        }
        for r in 0..block_rows {
            let row = &self.block_indices[self.index_pointer[r]..self.index_pointer[r + 1]];
            if let Some(&c) = row.iter().find(|&&c| c >= block_cols) {
                return Err(Error::BadIndex(format!(
                    "block row {r} references block column {c}, only {block_cols} exist"
                )));
            }
            if let Some(i) = row.windows(2).position(|p| p[0] >= p[1]) {
                return Err(Error::BadIndex(format!(
                    "block row {r} columns not strictly increasing: {} then {}",
                    row[i],
                    row[i + 1]
                )));
            }
        }
        let expected = nnzb * self.b_r * self.b_c;
        if self.block_data.len() != expected {
            return Err(Error::BadShape(format!(
                "block_data has length {}, expected {expected}",
                self.block_data.len()
            )));
        }
        Ok(())
    }

    /// Stores every `b_r x b_c` block holding at least one `|value| > drop_tol`.
    pub fn from_dense(d: &DenseMatrix<T>, b_r: usize, b_c: usize, drop_tol: f64) -> Result<Self> {
        let (n, k) = (d.rows(), d.cols());
        check_blocking(n, k, b_r, b_c)?;
        if drop_tol.is_nan() || drop_tol < 0.0 {
            return Err(Error::BadShape(format!("drop tolerance must be >= 0, got {drop_tol}")));
        }
        let mut index_pointer = Vec::with_capacity(n / b_r + 1);
        let mut block_indices = Vec::new();
        let mut block_data = Vec::new();
        index_pointer.push(0);
        for br in 0..n / b_r {
            for bc in 0..k / b_c {
                let keep = (0..b_r).any(|r| {
                    let row = &d.row(br * b_r + r)[bc * b_c..(bc + 1) * b_c];
                    row.iter().any(|v| v.to_f64().abs() > drop_tol)
                });
                if keep {
                    block_indices.push(bc);
                    for r in 0..b_r {
                        block_data.extend_from_slice(&d.row(br * b_r + r)[bc * b_c..(bc + 1) * b_c]);
                    }
                }
            }
            index_pointer.push(block_indices.len());
        }
        Ok(BsrMatrix { n, k, b_r, b_c, index_pointer, block_indices, block_data })
    }

    /// Expands to an `n x k` dense matrix; uncovered positions are exactly 0.0.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut data = vec![T::ZERO; self.n * self.k];
        let bsz = self.block_size();
        for br in 0..self.block_rows() {
            for p in self.row_range(br) {
                let bc = self.block_indices[p];
                let block = &self.block_data[p * bsz..(p + 1) * bsz];
                for r in 0..self.b_r {
                    let dst = (br * self.b_r + r) * self.k + bc * self.b_c;
                    data[dst..dst + self.b_c].copy_from_slice(&block[r * self.b_c..(r + 1) * self.b_c]);
                }
            }
        }
        DenseMatrix::new(self.n, self.k, data).expect("validated shape")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn block_rows_dim(&self) -> usize {
        self.b_r
    }

    pub fn block_cols_dim(&self) -> usize {
        self.b_c
    }

    /// Number of block rows, `n / b_r`.
    pub fn block_rows(&self) -> usize {
        self.n / self.b_r
    }

    /// Number of block columns, `k / b_c`.
    pub fn block_cols(&self) -> usize {
        self.k / self.b_c
    }

    pub fn block_size(&self) -> usize {
        self.b_r * self.b_c
    }

    pub fn nnzb(&self) -> usize {
        self.block_indices.len()
    }

    pub fn index_pointer(&self) -> &[usize] {
        &self.index_pointer
    }

    pub fn block_indices(&self) -> &[usize] {
        &self.block_indices
    }

    pub fn block_data(&self) -> &[T] {
        &self.block_data
    }

    /// Positions in `block_indices` belonging to block row `br`.
    pub fn row_range(&self, br: usize) -> std::ops::Range<usize> {
        self.index_pointer[br]..self.index_pointer[br + 1]
    }

    /// Block-column indices stored in block row `br`, ascending.
    pub fn row_block_indices(&self, br: usize) -> &[usize] {
        &self.block_indices[self.row_range(br)]
    }

    /// Row `r` (block-local) of stored block `p`, `b_c` elements.
    pub fn block_row_slice(&self, p: usize, r: usize) -> &[T] {
        let start = p * self.block_size() + r * self.b_c;
        &self.block_data[start..start + self.b_c]
    }

    #[allow(clippy::type_complexity)]
    pub fn into_raw(self) -> (usize, usize, usize, usize, Vec<usize>, Vec<usize>, Vec<T>) {
        (self.n, self.k, self.b_r, self.b_c, self.index_pointer, self.block_indices, self.block_data)
    }

    /// Bitwise equality of all arrays and dimensions.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.k == other.k
            && self.b_r == other.b_r
            && self.b_c == other.b_c
            && self.index_pointer == other.index_pointer
            && self.block_indices == other.block_indices
            && self.block_data.len() == other.block_data.len()
            && self
                .block_data
                .iter()
                .zip(&other.block_data)
                .all(|(a, b)| a.to_bits_u64() == b.to_bits_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> BsrMatrix<f64> {
        BsrMatrix::from_raw(
            4,
            4,
            2,
            2,
            vec![0, 1, 2],
            vec![1, 0],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        )
        .unwrap()
    }

    fn raw(ptr: Vec<usize>, idx: Vec<usize>, nblocks: usize) -> Result<BsrMatrix<f64>> {
        BsrMatrix::from_raw(4, 4, 2, 2, ptr, idx, vec![1.0; nblocks * 4])
    }

    #[test]
    fn zero_block_matrix_is_valid() {
        let w = BsrMatrix::<f64>::from_raw(2, 2, 2, 2, vec![0, 0], vec![], vec![]).unwrap();
        assert_eq!(w.nnzb(), 0);
        assert_eq!(w.to_dense().data(), &[0.0; 4]);
    }

    #[test]
    fn non_monotone_pointer_is_rejected() {
        assert!(matches!(raw(vec![0, 2, 1], vec![0], 1), Err(Error::BadPointer(_))));
        assert!(matches!(raw(vec![1, 1, 1], vec![0], 1), Err(Error::BadPointer(_))));
        assert!(matches!(raw(vec![0, 1, 1], vec![0, 1], 2), Err(Error::BadPointer(_))));
    }

    #[test]
    fn unsorted_or_out_of_range_columns_are_rejected() {
        assert!(matches!(raw(vec![0, 2, 2], vec![1, 0], 2), Err(Error::BadIndex(_))));
        assert!(matches!(raw(vec![0, 2, 2], vec![1, 1], 2), Err(Error::BadIndex(_))));
        assert!(matches!(raw(vec![0, 1, 1], vec![2], 1), Err(Error::BadIndex(_))));
    }

    #[test]
    fn shape_violations_are_rejected() {
        assert!(matches!(
            BsrMatrix::<f64>::from_raw(3, 4, 2, 2, vec![0, 0], vec![], vec![]),
            Err(Error::BadShape(_))
        ));
        assert!(matches!(raw(vec![0, 1], vec![0], 1), Err(Error::BadShape(_))));
        assert!(matches!(
            BsrMatrix::<f64>::from_raw(4, 4, 2, 2, vec![0, 1, 1], vec![0], vec![1.0; 3]),
            Err(Error::BadShape(_))
        ));
    }

    #[test]
    fn worked_example_expands_by_hand() {
        let expected = DenseMatrix::from_rows(&[
            vec![0.0, 0.0, 1.0, 2.0],
            vec![0.0, 0.0, 3.0, 4.0],
            vec![5.0, 6.0, 0.0, 0.0],
            vec![7.0, 8.0, 0.0, 0.0],
        ])
        .unwrap();
        let d = worked().to_dense();
        assert!(d.bit_eq(&expected));
        let back = BsrMatrix::from_dense(&d, 2, 2, 0.0).unwrap();
        assert!(back.bit_eq(&worked()));
    }

    #[test]
    fn identity_has_diagonal_blocks() {
        let w = BsrMatrix::from_dense(&DenseMatrix::<f64>::identity(4).unwrap(), 2, 2, 0.0).unwrap();
        assert_eq!(w.nnzb(), 2);
        assert_eq!(w.block_indices(), &[0, 1]);
        assert_eq!(w.index_pointer(), &[0, 1, 2]);
    }

    #[test]
    fn all_zero_dense_has_no_blocks() {
        let w = BsrMatrix::from_dense(&DenseMatrix::<f32>::zeros(4, 4).unwrap(), 2, 2, 0.0).unwrap();
        assert_eq!(w.nnzb(), 0);
        assert_eq!(w.index_pointer(), &[0, 0, 0]);
    }

    #[test]
    fn drop_tolerance_discards_small_blocks() {
        let d = DenseMatrix::from_rows(&[vec![0.01f64, 0.0, 2.0, 0.0], vec![0.0, 0.0, 0.0, 0.0]]).unwrap();
        let w = BsrMatrix::from_dense(&d, 2, 2, 0.1).unwrap();
        assert_eq!(w.block_indices(), &[1]);
        assert!(matches!(BsrMatrix::from_dense(&d, 2, 2, -1.0), Err(Error::BadShape(_))));
        assert!(matches!(BsrMatrix::from_dense(&d, 2, 3, 0.0), Err(Error::BadShape(_))));
    }

    #[test]
    fn problem_shape_requires_divisibility() {
        assert!(ProblemShape::new(1, 128, 768, 8, 8).is_ok());
        assert!(ProblemShape::new(1, 128, 768, 7, 8).is_err());
        assert!(ProblemShape::new(0, 128, 768, 8, 8).is_err());
    }
}
