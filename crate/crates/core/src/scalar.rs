use std::fmt::{self, Debug, Display};
use std::ops::{Add, AddAssign, Mul};

/// Storage precision of a matrix. Every matrix has exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    F32,
    F64,
}

impl ScalarKind {
    pub fn tag(self) -> u8 {
        match self {
            ScalarKind::F32 => 0,
            ScalarKind::F64 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ScalarKind::F32),
            1 => Some(ScalarKind::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            ScalarKind::F32 => 4,
            ScalarKind::F64 => 8,
        }
    }
}

impl Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarKind::F32 => "f32",
            ScalarKind::F64 => "f64",
        })
    }
}

impl std::str::FromStr for ScalarKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(ScalarKind::F32),
            "f64" => Ok(ScalarKind::F64),
            other => Err(format!("unknown scalar kind '{other}' (expected f32 or f64)")),
        }
    }
}

/// Floating-point element type used by every matrix and kernel.
///
/// Kernels accumulate in `Self`; there is no hidden widening for `f32`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Default
    + Add<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + 'static
{
    const KIND: ScalarKind;
    const ZERO: Self;
    /// Machine epsilon as `f64`.
    const EPS: f64;

    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
    fn abs(self) -> Self;

    /// Maps 64 random bits onto the open interval (-1, 1) using as many bits
    /// as the mantissa holds, so the result is exact in `Self`.
    fn from_unit_bits(bits: u64) -> Self;

    fn write_le(self, out: &mut Vec<u8>);
    /// `bytes` must be exactly `KIND.size()` long.
    fn read_le(bytes: &[u8]) -> Self;
    fn to_bits_u64(self) -> u64;
}

impl Scalar for f32 {
    const KIND: ScalarKind = ScalarKind::F32;
    const ZERO: Self = 0.0;
    const EPS: f64 = f32::EPSILON as f64;

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn abs(self) -> Self {
        f32::abs(self)
    }

    fn from_unit_bits(bits: u64) -> Self {
        // (2i + 1 - 2^24) / 2^24 for i in [0, 2^24): odd numerator keeps both ends open
        let i = (bits >> 40) as i64;
        ((2 * i + 1 - (1 << 24)) as f32) * (1.0 / 16_777_216.0)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte f32"))
    }

    fn to_bits_u64(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::F64;
    const ZERO: Self = 0.0;
    const EPS: f64 = f64::EPSILON;

    fn to_f64(self) -> f64 {
        self
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }

    fn from_unit_bits(bits: u64) -> Self {
        let i = (bits >> 11) as i64;
        ((2 * i + 1 - (1 << 53)) as f64) * (1.0 / 9_007_199_254_740_992.0)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte f64"))
    }

    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }
}
