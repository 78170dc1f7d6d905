//! Dense reference multiplication used to check every schedule.

use crate::bsr::BsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScalarKind};

/// `Y = X * W^T` for dense `W` (n x k): columns summed in ascending order
/// into one `f64` accumulator per element, cast to `T` at the end.
pub fn dense_matmul_bt<T: Scalar>(x: &DenseMatrix<T>, w: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if x.cols() != w.cols() {
        return Err(Error::ShapeMismatch(format!(
            "X is {}x{} but W is {}x{}",
            x.rows(),
            x.cols(),
            w.rows(),
            w.cols()
        )));
    }
    DenseMatrix::from_fn(x.rows(), w.rows(), |i, j| {
        let mut acc = 0.0f64;
        for (&a, &b) in x.row(i).iter().zip(w.row(j)) {
            acc += a.to_f64() * b.to_f64();
        }
        T::from_f64(acc)
    })
}

pub fn spmm_reference<T: Scalar>(x: &DenseMatrix<T>, w: &BsrMatrix<T>) -> Result<DenseMatrix<T>> {
    dense_matmul_bt(x, &w.to_dense())
}

/// Denominator floor for relative errors.
pub const REL_ERR_FLOOR: f64 = 1e-30;

/// Accepted relative error for a scalar kind.
pub fn tolerance(kind: ScalarKind) -> f64 {
    match kind {
        ScalarKind::F32 => 1e-5,
        ScalarKind::F64 => 1e-12,
    }
}

/// Worst element-wise deviation of a result from the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    /// `max |y - ref| / max(|ref|, REL_ERR_FLOOR)`. Unbounded near cancellation.
    pub max_rel: f64,
    /// `max |y - ref| / max(sum_c |x_ic * w_jc|, REL_ERR_FLOOR)`: error relative
    /// to the magnitude of the dot product, bounded by rounding for any
    /// summation order. Equals `max_rel` when no magnitudes are known.
    pub max_scaled: f64,
    pub max_abs: f64,
    /// Element with the largest scaled error.
    pub worst: (usize, usize),
}

impl Deviation {
    /// Gate used for schedule verification.
    pub fn within(&self, tol: f64) -> bool {
        self.max_scaled <= tol
    }
}

fn check_same_shape<A: Scalar, B: Scalar>(y: &DenseMatrix<A>, r: &DenseMatrix<B>) -> Result<()> {
    if (y.rows(), y.cols()) != (r.rows(), r.cols()) {
        return Err(Error::ShapeMismatch(format!(
            "result is {}x{}, reference is {}x{}",
            y.rows(),
            y.cols(),
            r.rows(),
            r.cols()
        )));
    }
    Ok(())
}

fn accumulate<T: Scalar>(y: &DenseMatrix<T>, reference: &DenseMatrix<T>, magnitude: Option<&[f64]>) -> Deviation {
    let mut dev = Deviation { max_rel: 0.0, max_scaled: 0.0, max_abs: 0.0, worst: (0, 0) };
    for (idx, (&a, &b)) in y.data().iter().zip(reference.data()).enumerate() {
        let (a, b) = (a.to_f64(), b.to_f64());
        let abs = (a - b).abs();
        // NaN anywhere counts as unbounded error
        let (rel, scaled) = if abs.is_nan() {
            (f64::INFINITY, f64::INFINITY)
        } else {
            let rel = abs / b.abs().max(REL_ERR_FLOOR);
            let scaled = magnitude.map_or(rel, |mag| abs / mag[idx].max(REL_ERR_FLOOR));
            (rel, scaled)
        };
        dev.max_abs = dev.max_abs.max(abs);
        dev.max_rel = dev.max_rel.max(rel);
        if scaled > dev.max_scaled {
            dev.max_scaled = scaled;
            dev.worst = (idx / y.cols(), idx % y.cols());
        }
    }
    dev
}

/// Plain element-wise comparison, without dot-product magnitudes.
pub fn deviation<T: Scalar>(y: &DenseMatrix<T>, reference: &DenseMatrix<T>) -> Result<Deviation> {
    check_same_shape(y, reference)?;
    Ok(accumulate(y, reference, None))
}

/// Reference output of one `(X, W_B)` pair together with the per-element
/// magnitudes `sum_c |x_ic * w_jc|`, computed once and checked against any
/// number of schedule outputs.
#[derive(Debug, Clone)]
pub struct Reference<T> {
    values: DenseMatrix<T>,
    magnitude: Vec<f64>,
}

impl<T: Scalar> Reference<T> {
    pub fn compute(x: &DenseMatrix<T>, w: &BsrMatrix<T>) -> Result<Self> {
        let dense = w.to_dense();
        let values = dense_matmul_bt(x, &dense)?;
        let mut magnitude = Vec::with_capacity(x.rows() * dense.rows());
        for i in 0..x.rows() {
            for j in 0..dense.rows() {
                magnitude.push(x.row(i).iter().zip(dense.row(j)).map(|(a, b)| (a.to_f64() * b.to_f64()).abs()).sum());
            }
        }
        Ok(Reference { values, magnitude })
    }

    pub fn values(&self) -> &DenseMatrix<T> {
        &self.values
    }

    pub fn check(&self, y: &DenseMatrix<T>) -> Result<Deviation> {
        check_same_shape(y, &self.values)?;
        Ok(accumulate(y, &self.values, Some(&self.magnitude)))
    }

    /// `check` against the kind's default tolerance.
    pub fn accepts(&self, y: &DenseMatrix<T>) -> Result<bool> {
        Ok(self.check(y)?.within(tolerance(T::KIND)))
    }
}
