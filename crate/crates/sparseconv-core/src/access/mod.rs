//! Analytical model of how the engines would drive a wide-SIMD memory
//! system: warp-level coalescing of input reads and output writes, reuse
//! statistics, arithmetic intensity, and off-chip traffic under the three
//! stationary dataflows.
//!
//! Nothing here executes a convolution; the simulators enumerate the byte
//! addresses the direct sparse engine's loop structure implies and fold
//! them into transaction counts and word totals.

use std::fmt;

mod coalescing;
mod traffic;

pub use coalescing::{simulate_read_coalescing, simulate_write_coalescing};
pub use traffic::{arithmetic_intensity, dataflow_traffic, reuse_stats};

/// Errors from model construction and simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    ZeroLanes,
    /// txn_bytes must be a positive multiple of elem_bytes.
    TxnGranularity { txn_bytes: usize, elem_bytes: usize },
    NeedStretched,
    StretchMismatch { expected: (usize, usize), got: (usize, usize) },
    ZeroBuffer,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::ZeroLanes => write!(f, "warp model needs at least one lane"),
            ModelError::TxnGranularity { txn_bytes, elem_bytes } => write!(
                f,
                "transaction size {txn_bytes} must be a positive multiple of element size \
                 {elem_bytes}"
            ),
            ModelError::NeedStretched => {
                write!(f, "coalescing simulation needs a stretched weight matrix")
            }
            ModelError::StretchMismatch { expected, got } => write!(
                f,
                "weight matrix stretched for padded input {}x{}, shape has {}x{}",
                got.0, got.1, expected.0, expected.1
            ),
            ModelError::ZeroBuffer => write!(f, "buffer size must be >= 1 word"),
        }
    }
}

impl std::error::Error for ModelError {}

/// Parameters of the modeled SIMD memory system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarpModel {
    /// Threads issuing one memory request together.
    pub lanes: usize,
    /// Transaction granularity in bytes; requests within one aligned
    /// segment of this size coalesce into one transaction.
    pub txn_bytes: usize,
    /// Element size in bytes.
    pub elem_bytes: usize,
}

impl WarpModel {
    pub fn new(lanes: usize, txn_bytes: usize, elem_bytes: usize) -> Result<Self, ModelError> {
        if lanes == 0 {
            return Err(ModelError::ZeroLanes);
        }
        if elem_bytes == 0 || txn_bytes == 0 || txn_bytes % elem_bytes != 0 {
            return Err(ModelError::TxnGranularity { txn_bytes, elem_bytes });
        }
        Ok(WarpModel { lanes, txn_bytes, elem_bytes })
    }
}

impl Default for WarpModel {
    /// 32 lanes, 32-byte transactions, 4-byte elements.
    fn default() -> Self {
        WarpModel { lanes: 32, txn_bytes: 32, elem_bytes: 4 }
    }
}

/// Coalescing tallies over one simulated access stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AccessMetrics {
    /// Warp-level accesses issued.
    pub warp_reads: u64,
    /// Aligned segments actually transferred.
    pub transactions: u64,
    /// Lower bound: ceil(bytes touched / txn_bytes) per warp read, summed.
    pub ideal_transactions: u64,
    /// Warp reads needing more than one transaction.
    pub divergent_warp_reads: u64,
    /// Bytes of distinct elements the warps asked for.
    pub unique_bytes: u64,
    /// Bytes moved: transactions * txn_bytes.
    pub transferred_bytes: u64,
}

impl AccessMetrics {
    /// Fraction of transferred bytes that were actually requested:
    /// `unique_bytes / transferred_bytes`. 1.0 means every transaction was
    /// fully used; a lone 4-byte access through a 32-byte transaction
    /// scores 0.125.
    pub fn efficiency(&self) -> f64 {
        if self.transferred_bytes == 0 {
            return 1.0;
        }
        self.unique_bytes as f64 / self.transferred_bytes as f64
    }
}

/// Word counts (4-byte elements) for one operand-traffic breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficWords {
    pub in_words: u64,
    pub w_words: u64,
    pub out_words: u64,
}

impl TrafficWords {
    pub fn total(&self) -> u64 {
        self.in_words + self.w_words + self.out_words
    }
}

/// Reuse and duplication statistics for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReuseStats {
    /// Times each stored weight is used per sample: e*f.
    pub weight_reuse_per_sample: u64,
    /// Times each stored weight is used across the batch: n*e*f.
    pub weight_reuse_batch: u64,
    /// Values the lowered matrix materializes per sample: c*r*s*e*f.
    pub lowered_entries_per_sample: u64,
    /// Padded input footprint per sample read by the direct path:
    /// c*h_pad*w_pad.
    pub direct_footprint_per_sample: u64,
    /// Word traffic of the direct sparse path (padded input, CSR arrays,
    /// output).
    pub words_direct: TrafficWords,
    /// Word traffic of the lowered sparse path (materialized lowered
    /// matrices, CSR arrays, output).
    pub words_lowered: TrafficWords,
}

/// Which input-word accounting a derived metric uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessPath {
    /// Reads the padded input in place.
    Direct,
    /// Reads a materialized lowered matrix.
    Lowered,
}

/// The operand class kept resident in the fast buffer while the others
/// stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataflowScheme {
    WeightStationary,
    OutputStationary,
    InputStationary,
}

impl DataflowScheme {
    pub const ALL: [DataflowScheme; 3] = [
        DataflowScheme::WeightStationary,
        DataflowScheme::OutputStationary,
        DataflowScheme::InputStationary,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DataflowScheme::WeightStationary => "weight-stationary",
            DataflowScheme::OutputStationary => "output-stationary",
            DataflowScheme::InputStationary => "input-stationary",
        }
    }
}

impl fmt::Display for DataflowScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Off-chip word traffic of one layer under one dataflow and buffer size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficEstimate {
    pub scheme: DataflowScheme,
    /// Fast-buffer capacity in words; `u64::MAX` acts as unbounded.
    pub buffer_words: u64,
    pub in_words: u64,
    pub w_words: u64,
    pub out_words: u64,
    pub total_words: u64,
}
