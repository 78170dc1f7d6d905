use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix. Holds the operand `X` (m x k) and the output `Y` (m x n).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::BadShape(format!(
                "dense matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::BadShape(format!(
                "dense data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![T::ZERO; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Builds a matrix from nested rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::BadShape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(size: usize) -> Result<Self> {
        Self::from_fn(size, size, |i, j| if i == j { T::from_f64(1.0) } else { T::ZERO })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bitwise equality (distinguishes `0.0` from `-0.0`, equates identical NaNs).
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits_u64() == b.to_bits_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_length_mismatch_and_empty() {
        assert!(matches!(DenseMatrix::<f64>::new(2, 2, vec![0.0; 3]), Err(Error::BadShape(_))));
        assert!(matches!(DenseMatrix::<f64>::new(0, 2, vec![]), Err(Error::BadShape(_))));
    }

    #[test]
    fn from_rows_is_row_major() {
        let d = DenseMatrix::from_rows(&[vec![1.0f32, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(d.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d.get(1, 0), 3.0);
        assert_eq!(d.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn bit_eq_sees_signed_zero() {
        let a = DenseMatrix::new(1, 1, vec![0.0f64]).unwrap();
        let b = DenseMatrix::new(1, 1, vec![-0.0f64]).unwrap();
        assert_eq!(a, b);
        assert!(!a.bit_eq(&b));
    }
}
