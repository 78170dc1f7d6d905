//! Little-endian binary file formats.
//!
//! BSR file: `"BSR1"`, u8 kind (0 = f32, 1 = f64), u64 `n, k, b_r, b_c, nnzb`,
//! then `index_pointer` (u64 x (n/b_r + 1)), `block_indices` (u64 x nnzb) and
//! `block_data` (scalar x nnzb*b_r*b_c).
//!
//! Dense file: `"DNS1"`, u8 kind, u64 `rows, cols`, row-major scalars.

use std::fs;
use std::path::Path;

use crate::bsr::BsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScalarKind};

pub const BSR_MAGIC: &[u8; 4] = b"BSR1";
pub const DENSE_MAGIC: &[u8; 4] = b"DNS1";

/// A dense matrix of either scalar kind, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyDense {
    F32(DenseMatrix<f32>),
    F64(DenseMatrix<f64>),
}

/// A BSR matrix of either scalar kind, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyBsr {
    F32(BsrMatrix<f32>),
    F64(BsrMatrix<f64>),
}

impl AnyDense {
    pub fn kind(&self) -> ScalarKind {
        match self {
            AnyDense::F32(_) => ScalarKind::F32,
            AnyDense::F64(_) => ScalarKind::F64,
        }
    }
}

impl AnyBsr {
    pub fn kind(&self) -> ScalarKind {
        match self {
            AnyBsr::F32(_) => ScalarKind::F32,
            AnyBsr::F64(_) => ScalarKind::F64,
        }
    }
}

impl From<DenseMatrix<f32>> for AnyDense {
    fn from(d: DenseMatrix<f32>) -> Self {
        AnyDense::F32(d)
    }
}

impl From<DenseMatrix<f64>> for AnyDense {
    fn from(d: DenseMatrix<f64>) -> Self {
        AnyDense::F64(d)
    }
}

impl From<BsrMatrix<f32>> for AnyBsr {
    fn from(w: BsrMatrix<f32>) -> Self {
        AnyBsr::F32(w)
    }
}

impl From<BsrMatrix<f64>> for AnyBsr {
    fn from(w: BsrMatrix<f64>) -> Self {
        AnyBsr::F64(w)
    }
}

fn put_u64(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u64).to_le_bytes());
}

pub fn encode_bsr<T: Scalar>(w: &BsrMatrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(45 + 8 * (w.index_pointer().len() + w.nnzb()) + T::KIND.size() * w.block_data().len());
    out.extend_from_slice(BSR_MAGIC);
    out.push(T::KIND.tag());
    for v in [w.n(), w.k(), w.block_rows_dim(), w.block_cols_dim(), w.nnzb()] {
        put_u64(&mut out, v);
    }
    for &p in w.index_pointer() {
        put_u64(&mut out, p);
    }
    for &c in w.block_indices() {
        put_u64(&mut out, c);
    }
    for &v in w.block_data() {
        v.write_le(&mut out);
    }
    out
}

pub fn encode_dense<T: Scalar>(d: &DenseMatrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(21 + T::KIND.size() * d.data().len());
    out.extend_from_slice(DENSE_MAGIC);
    out.push(T::KIND.tag());
    put_u64(&mut out, d.rows());
    put_u64(&mut out, d.cols());
    for &v in d.data() {
        v.write_le(&mut out);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated file while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got == expected {
            return Ok(());
        }
        if got[..3] == expected[..3] {
            return Err(Error::Format(format!(
                "unsupported format version '{}', expected '{}'",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(expected)
            )));
        }
        Err(Error::Format(format!("bad magic bytes {got:?}")))
    }

    fn kind(&mut self) -> Result<ScalarKind> {
        let tag = self.take(1, "scalar kind")?[0];
        ScalarKind::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown scalar kind tag {tag}")))
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in memory")))
    }

    fn u64s(&mut self, count: usize, what: &str) -> Result<Vec<usize>> {
        self.check_remaining(count, 8, what)?;
        (0..count).map(|_| self.u64(what)).collect()
    }

    fn scalars<T: Scalar>(&mut self, count: usize, what: &str) -> Result<Vec<T>> {
        let size = T::KIND.size();
        self.check_remaining(count, size, what)?;
        let raw = self.take(count * size, what)?;
        Ok(raw.chunks_exact(size).map(T::read_le).collect())
    }

    // Rejects absurd counts before allocating.
    fn check_remaining(&self, count: usize, size: usize, what: &str) -> Result<()> {
        match count.checked_mul(size) {
            Some(len) if len <= self.bytes.len() - self.pos => Ok(()),
            _ => Err(Error::Format(format!("truncated file: {count} entries of {what} declared"))),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn decode_bsr_payload<T: Scalar>(r: &mut Reader<'_>) -> Result<BsrMatrix<T>> {
    let n = r.u64("n")?;
    let k = r.u64("k")?;
    let b_r = r.u64("b_r")?;
    let b_c = r.u64("b_c")?;
    let nnzb = r.u64("nnzb")?;
    if b_r == 0 || n % b_r != 0 {
        return Err(Error::BadShape(format!("block rows {b_r} do not divide n={n}")));
    }
    let index_pointer = r.u64s(n / b_r + 1, "index_pointer")?;
    let block_indices = r.u64s(nnzb, "block_indices")?;
    let len = nnzb
        .checked_mul(b_r)
        .and_then(|v| v.checked_mul(b_c))
        .ok_or_else(|| Error::Format("block_data length overflows".into()))?;
    let block_data = r.scalars::<T>(len, "block_data")?;
    r.finish()?;
    BsrMatrix::from_raw(n, k, b_r, b_c, index_pointer, block_indices, block_data)
}

pub fn decode_bsr(bytes: &[u8]) -> Result<AnyBsr> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(BSR_MAGIC)?;
    Ok(match r.kind()? {
        ScalarKind::F32 => AnyBsr::F32(decode_bsr_payload(&mut r)?),
        ScalarKind::F64 => AnyBsr::F64(decode_bsr_payload(&mut r)?),
    })
}

fn decode_dense_payload<T: Scalar>(r: &mut Reader<'_>) -> Result<DenseMatrix<T>> {
    let rows = r.u64("rows")?;
    let cols = r.u64("cols")?;
    let len = rows.checked_mul(cols).ok_or_else(|| Error::Format("dense size overflows".into()))?;
    let data = r.scalars::<T>(len, "dense data")?;
    r.finish()?;
    DenseMatrix::new(rows, cols, data)
}

pub fn decode_dense(bytes: &[u8]) -> Result<AnyDense> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(DENSE_MAGIC)?;
    Ok(match r.kind()? {
        ScalarKind::F32 => AnyDense::F32(decode_dense_payload(&mut r)?),
        ScalarKind::F64 => AnyDense::F64(decode_dense_payload(&mut r)?),
    })
}

pub fn save_bsr<T: Scalar>(w: &BsrMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_bsr(w))?;
    Ok(())
}

pub fn load_bsr(path: impl AsRef<Path>) -> Result<AnyBsr> {
    decode_bsr(&fs::read(path)?)
}

pub fn save_dense<T: Scalar>(d: &DenseMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dense(d))?;
    Ok(())
}

pub fn load_dense(path: impl AsRef<Path>) -> Result<AnyDense> {
    decode_dense(&fs::read(path)?)
}

impl AnyBsr {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            AnyBsr::F32(w) => save_bsr(w, path),
            AnyBsr::F64(w) => save_bsr(w, path),
        }
    }
}

impl AnyDense {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            AnyDense::F32(d) => save_dense(d, path),
            AnyDense::F64(d) => save_dense(d, path),
        }
    }
}
