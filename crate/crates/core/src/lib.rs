//! Block-sparse (BSR) weights, sparse-dense multiplication `Y = X * W_B^T`
//! under four parallel schedules, a dense reference, a lane-count auto-tuner
//! and a benchmark suite over a grid of shapes, block sizes and sparsities.

pub mod autotune;
pub mod bench;
pub mod bsr;
pub mod dense;
pub mod error;
pub mod gen;
pub mod io;
pub mod kernels;
pub mod oracle;
pub mod scalar;
pub mod timing;

pub use bsr::{BsrMatrix, ProblemShape};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use gen::{generate_bsr, generate_dense, GenSpec, ValueMode};
pub use io::{AnyBsr, AnyDense};
pub use kernels::{run_schedule, run_schedule_on, tree_reduce, Exec, Schedule, ScheduleKind};
pub use scalar::{Scalar, ScalarKind};
