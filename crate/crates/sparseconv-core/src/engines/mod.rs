//! The four convolution execution paths.
//!
//! All engines compute the same layer, differing only in how the reduction
//! is staged:
//!
//! * [`conv_dense_direct`] — the 7-loop sliding-window nest; the reference
//!   oracle every other path is tested against.
//! * [`conv_lowered_dense`] — unfold each input sample to a `(c*r*s) x
//!   (e*f)` matrix ([`im2col`]) and multiply by the reshaped filter bank
//!   ([`gemm`]).
//! * [`conv_lowered_sparse`] — the same lowering multiplied by a CSR filter
//!   bank ([`csrmm`]).
//! * [`conv_sparse_direct`] — walk the stretched CSR and scale shifted
//!   input windows directly, touching only nonzero weights; also available
//!   with a deterministic multi-threaded scheduler
//!   ([`conv_sparse_direct_parallel`]).
//!
//! Accumulation order per output element is pinned down for every path
//! (`(c, r, s)` ascending for dense, ascending stored-element order for
//! sparse), so cross-engine differences are pure floating-point reordering
//! noise and the parallel scheduler is bitwise equal to its sequential
//! form.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::sparse::{CsrMatrix, CsrMode};
use crate::tensor::{ConvShape, Tensor4D};

mod direct;
mod lowered;
mod sparse_direct;

pub use direct::conv_dense_direct;
pub use lowered::{conv_lowered_dense, conv_lowered_sparse, csrmm, gemm, im2col, im2col_sample};
pub use sparse_direct::{conv_sparse_direct, conv_sparse_direct_parallel};

/// Errors from engine precondition checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineError {
    InputDims { expected: [usize; 4], got: [usize; 4] },
    WeightDims { expected: [usize; 4], got: [usize; 4] },
    WeightMatrixDims { expected_rows: usize, expected_cols: usize, rows: usize, cols: usize },
    /// The operation needs the other CSR mode (stretched vs unstretched).
    ModeMismatch { need: &'static str },
    /// Stretched for different padded input extents than this shape's.
    StretchMismatch { expected: (usize, usize), got: (usize, usize) },
    GemmDims { a_rows: usize, a_cols: usize, b_rows: usize, b_cols: usize },
    MatrixData { rows: usize, cols: usize, got: usize },
    ZeroWorkers,
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::InputDims { expected, got } => {
                write!(f, "input dims {got:?} do not match shape (expected {expected:?})")
            }
            EngineError::WeightDims { expected, got } => {
                write!(f, "weight dims {got:?} do not match shape (expected {expected:?})")
            }
            EngineError::WeightMatrixDims { expected_rows, expected_cols, rows, cols } => write!(
                f,
                "weight matrix is {rows}x{cols}, shape expects {expected_rows}x{expected_cols}"
            ),
            EngineError::ModeMismatch { need } => {
                write!(f, "weight matrix must be {need} for this engine")
            }
            EngineError::StretchMismatch { expected, got } => write!(
                f,
                "weight matrix stretched for padded input {}x{}, shape has {}x{}",
                got.0, got.1, expected.0, expected.1
            ),
            EngineError::GemmDims { a_rows, a_cols, b_rows, b_cols } => {
                write!(f, "cannot multiply {a_rows}x{a_cols} by {b_rows}x{b_cols}")
            }
            EngineError::MatrixData { rows, cols, got } => {
                write!(f, "matrix data length {got} does not match {rows}x{cols}")
            }
            EngineError::ZeroWorkers => write!(f, "worker count must be >= 1"),
        }
    }
}

impl std::error::Error for EngineError {}

/// Dense row-major 2-D matrix used by the lowering path.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, EngineError> {
        if data.len() != rows * cols {
            return Err(EngineError::MatrixData { rows, cols, got: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }
}

/// Result of one engine invocation.
#[derive(Debug, Clone)]
pub struct ConvResult {
    pub output: Tensor4D,
    /// Floating-point operations executed: 2x the multiply-accumulate
    /// count, accumulated from actual loop trips. Dense paths execute
    /// `n*m*c*r*s*e*f` MACs; sparse paths `n*nnz*e*f`.
    pub flops: u64,
    /// Wall time of the compute phase.
    pub elapsed: Duration,
}

/// Which execution path to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    DenseDirect,
    LoweredDense,
    LoweredSparse,
    SparseDirect,
    /// Resolved to a concrete kind by [`select_engine`] before execution.
    Auto,
}

impl EngineKind {
    pub const ALL_CONCRETE: [EngineKind; 4] = [
        EngineKind::DenseDirect,
        EngineKind::LoweredDense,
        EngineKind::LoweredSparse,
        EngineKind::SparseDirect,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EngineKind::DenseDirect => "dense-direct",
            EngineKind::LoweredDense => "lowered-dense",
            EngineKind::LoweredSparse => "lowered-sparse",
            EngineKind::SparseDirect => "sparse-direct",
            EngineKind::Auto => "auto",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error for unrecognized engine names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseEngineError {
    pub got: String,
}

impl fmt::Display for ParseEngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown engine `{}` (expected dense-direct, lowered-dense, lowered-sparse, \
             sparse-direct, or auto)",
            self.got
        )
    }
}

impl std::error::Error for ParseEngineError {}

impl FromStr for EngineKind {
    type Err = ParseEngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense-direct" => Ok(EngineKind::DenseDirect),
            "lowered-dense" => Ok(EngineKind::LoweredDense),
            "lowered-sparse" => Ok(EngineKind::LoweredSparse),
            "sparse-direct" => Ok(EngineKind::SparseDirect),
            "auto" => Ok(EngineKind::Auto),
            other => Err(ParseEngineError { got: other.to_string() }),
        }
    }
}

/// Sparsity at or above which [`select_engine`] picks the direct sparse
/// path.
pub const DEFAULT_AUTO_SPARSITY_THRESHOLD: f64 = 0.6;

/// Resolve `Auto` to a concrete engine with the default threshold: the
/// direct sparse path pays off once enough weights are zero; below the
/// threshold the dense lowering is the safer default.
pub fn select_engine(shape: &ConvShape, sparsity: f64) -> EngineKind {
    select_engine_with(shape, sparsity, DEFAULT_AUTO_SPARSITY_THRESHOLD)
}

/// [`select_engine`] with an explicit threshold. Sparsity exactly at the
/// threshold selects the sparse path (`>=` comparison). The shape
/// parameter is reserved for shape-aware rules; the current rule keys on
/// sparsity alone.
pub fn select_engine_with(_shape: &ConvShape, sparsity: f64, threshold: f64) -> EngineKind {
    if sparsity >= threshold {
        EngineKind::SparseDirect
    } else {
        EngineKind::LoweredDense
    }
}

/// Elementwise comparison report for engine outputs.
#[derive(Debug, Clone, Copy)]
pub struct ErrorStats {
    /// Largest |got - want|.
    pub max_abs: f64,
    /// Largest |got - want| / (atol + rtol*|want|); <= 1 means within
    /// tolerance.
    pub max_ratio: f64,
    /// Flat index of the worst element by ratio.
    pub argmax: usize,
    pub within: bool,
}

pub const DEFAULT_RTOL: f64 = 1e-5;
pub const DEFAULT_ATOL: f64 = 1e-6;

/// Compare `got` against the reference `want` with the tolerance rule
/// `|got - want| <= atol + rtol*|want|` per element.
pub fn compare_outputs(got: &Tensor4D, want: &Tensor4D, rtol: f64, atol: f64) -> ErrorStats {
    assert_eq!(got.dims(), want.dims(), "comparing tensors of different dims");
    let mut stats = ErrorStats { max_abs: 0.0, max_ratio: 0.0, argmax: 0, within: true };
    for (i, (&a, &b)) in got.data().iter().zip(want.data()).enumerate() {
        let diff = (a as f64 - b as f64).abs();
        let ratio = diff / (atol + rtol * (b as f64).abs());
        if diff > stats.max_abs {
            stats.max_abs = diff;
        }
        if ratio > stats.max_ratio {
            stats.max_ratio = ratio;
            stats.argmax = i;
        }
    }
    stats.within = stats.max_ratio <= 1.0;
    stats
}

fn check_input_dims(input: &Tensor4D, expected: [usize; 4]) -> Result<(), EngineError> {
    if input.dims() != expected {
        return Err(EngineError::InputDims { expected, got: input.dims() });
    }
    Ok(())
}

fn check_weight_dims(weights: &Tensor4D, shape: &ConvShape) -> Result<(), EngineError> {
    if weights.dims() != shape.weight_dims() {
        return Err(EngineError::WeightDims {
            expected: shape.weight_dims(),
            got: weights.dims(),
        });
    }
    Ok(())
}

fn check_csr_unstretched(csr: &CsrMatrix, shape: &ConvShape) -> Result<(), EngineError> {
    if csr.mode != CsrMode::Unstretched {
        return Err(EngineError::ModeMismatch { need: "unstretched" });
    }
    if csr.rows != shape.m() || csr.cols != shape.kernel_cols() {
        return Err(EngineError::WeightMatrixDims {
            expected_rows: shape.m(),
            expected_cols: shape.kernel_cols(),
            rows: csr.rows,
            cols: csr.cols,
        });
    }
    Ok(())
}

fn check_csr_stretched(csr: &CsrMatrix, shape: &ConvShape) -> Result<(), EngineError> {
    match csr.mode {
        CsrMode::Unstretched => Err(EngineError::ModeMismatch { need: "stretched" }),
        CsrMode::Stretched { h_pad, w_pad } => {
            if (h_pad, w_pad) != (shape.h_pad(), shape.w_pad()) {
                return Err(EngineError::StretchMismatch {
                    expected: (shape.h_pad(), shape.w_pad()),
                    got: (h_pad, w_pad),
                });
            }
            if csr.rows != shape.m() || csr.cols != shape.c() * h_pad * w_pad {
                return Err(EngineError::WeightMatrixDims {
                    expected_rows: shape.m(),
                    expected_cols: shape.c() * h_pad * w_pad,
                    rows: csr.rows,
                    cols: csr.cols,
                });
            }
            Ok(())
        }
    }
}
