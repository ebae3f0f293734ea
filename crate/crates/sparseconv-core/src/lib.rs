//! Sparse CNN convolution engines with an analytical GPU access model.
//!
//! The crate computes single convolution layers four interchangeable ways
//! and predicts how each way would stress a wide-SIMD memory system:
//!
//! * [`tensor`] — layer shapes, flat 4-D tensors, the additive channel
//!   layout function, zero padding, and a fully specified deterministic
//!   PRNG for test data.
//! * [`sparse`] — CSR weight matrices, magnitude pruning, footprint
//!   accounting, and the offline weight-stretching transform that turns
//!   kernel coordinates into padded-input offsets.
//! * [`engines`] — direct dense (the oracle), lowered dense (im2col +
//!   GEMM), lowered sparse (im2col + CSR product), and direct sparse over
//!   stretched weights, sequential or deterministically parallel.
//! * [`access`] — warp coalescing simulation, reuse statistics,
//!   arithmetic intensity, and traffic under the three stationary
//!   dataflows.
//!
//! All engines fix their per-output-element accumulation order, so their
//! outputs agree within floating-point reordering tolerance and parallel
//! runs are bitwise reproducible.

pub mod access;
pub mod engines;
pub mod sparse;
pub mod tensor;

pub use access::{
    arithmetic_intensity, dataflow_traffic, reuse_stats, simulate_read_coalescing,
    simulate_write_coalescing, AccessMetrics, AccessPath, DataflowScheme, ModelError, ReuseStats,
    TrafficEstimate, TrafficWords, WarpModel,
};
pub use engines::{
    compare_outputs, conv_dense_direct, conv_lowered_dense, conv_lowered_sparse,
    conv_sparse_direct, conv_sparse_direct_parallel, csrmm, gemm, im2col, im2col_sample,
    select_engine, select_engine_with, ConvResult, EngineError, EngineKind, ErrorStats, Matrix,
    ParseEngineError, DEFAULT_ATOL, DEFAULT_AUTO_SPARSITY_THRESHOLD, DEFAULT_RTOL,
};
pub use sparse::{
    csr_to_dense, dense_to_csr, prune_by_magnitude, stretch_weights, CsrMatrix, CsrMode,
    SparseError,
};
pub use tensor::{layout_f, pad_input, ConvShape, Rng64, ShapeError, Tensor4D};
