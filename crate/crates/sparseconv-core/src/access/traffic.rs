//! Reuse statistics, arithmetic intensity, and stationary-dataflow traffic
//! models.
//!
//! All word counts are 4-byte words. Weight traffic uses the CSR payload
//! model: `value` + `colidx` per stored element (`2*nnz`) plus the rowptr
//! array (`m + 1`) where the full footprint is meant.

use super::{AccessPath, DataflowScheme, ModelError, ReuseStats, TrafficEstimate, TrafficWords};
use crate::tensor::ConvShape;

const WORD_BYTES: u64 = 4;

fn words(shape: &ConvShape, nnz: usize, path: AccessPath) -> TrafficWords {
    let (e, f) = shape.output_dims();
    let in_words = match path {
        AccessPath::Direct => shape.n() * shape.c() * shape.h_pad() * shape.w_pad(),
        AccessPath::Lowered => shape.n() * shape.kernel_cols() * e * f,
    } as u64;
    TrafficWords {
        in_words,
        w_words: (2 * nnz + shape.m() + 1) as u64,
        out_words: (shape.n() * shape.m() * e * f) as u64,
    }
}

/// Reuse and duplication counts for one layer with `nnz` stored weights.
pub fn reuse_stats(shape: &ConvShape, nnz: usize) -> ReuseStats {
    let (e, f) = shape.output_dims();
    let ef = (e * f) as u64;
    ReuseStats {
        weight_reuse_per_sample: ef,
        weight_reuse_batch: shape.n() as u64 * ef,
        lowered_entries_per_sample: shape.kernel_cols() as u64 * ef,
        direct_footprint_per_sample: (shape.c() * shape.h_pad() * shape.w_pad()) as u64,
        words_direct: words(shape, nnz, AccessPath::Direct),
        words_lowered: words(shape, nnz, AccessPath::Lowered),
    }
}

/// Executed floating-point operations per byte of modeled traffic under a
/// no-cache model: `2*n*nnz*e*f / (4 * (in + w + out words))`. The two
/// paths differ only in the input term — the direct path reads the padded
/// input in place, the lowered path reads its duplicated unfolding.
pub fn arithmetic_intensity(shape: &ConvShape, nnz: usize, path: AccessPath) -> f64 {
    let (e, f) = shape.output_dims();
    let flops = 2 * (shape.n() * nnz * e * f) as u64;
    let traffic = words(shape, nnz, path).total() * WORD_BYTES;
    flops as f64 / traffic as f64
}

/// Off-chip word traffic of one layer under `scheme` with a fast buffer of
/// `buffer_words` words (`u64::MAX` acts as unbounded).
///
/// Compulsory volumes are `in_once = n*c*h_pad*w_pad`, `w_once = 2*nnz`,
/// `out_once = n*m*e*f`. The stationary operand streams in once; of the
/// others, one streams once and one re-streams per resident tile:
///
/// * weight-stationary: `g = max(1, floor(B*m / max(m, w_once)))` filter
///   rows fit the buffer, so inputs re-stream `ceil(m/g)` times;
/// * output-stationary: `B` accumulator words tile the `n*e*f` output
///   positions of all samples, weights re-stream per tile;
/// * input-stationary: `B` words tile the padded input, weights re-stream
///   per tile.
pub fn dataflow_traffic(
    shape: &ConvShape,
    nnz: usize,
    scheme: DataflowScheme,
    buffer_words: u64,
) -> Result<TrafficEstimate, ModelError> {
    if buffer_words == 0 {
        return Err(ModelError::ZeroBuffer);
    }
    let (e, f) = shape.output_dims();
    let in_once = (shape.n() * shape.c() * shape.h_pad() * shape.w_pad()) as u64;
    let w_once = 2 * nnz as u64;
    let out_once = (shape.n() * shape.m() * e * f) as u64;
    let m = shape.m() as u64;

    let (in_words, w_words, out_words) = match scheme {
        DataflowScheme::WeightStationary => {
            // Exact rational: B / max(1, w_once/m) = B*m / max(m, w_once),
            // widened so B = u64::MAX cannot overflow.
            let resident =
                (buffer_words as u128 * m as u128) / (m.max(w_once) as u128);
            let g = resident.min(u64::MAX as u128).max(1) as u64;
            (in_once * m.div_ceil(g), w_once, out_once)
        }
        DataflowScheme::OutputStationary => {
            let tiles = ((shape.n() * e * f) as u64).div_ceil(buffer_words);
            (in_once, w_once * tiles, out_once)
        }
        DataflowScheme::InputStationary => {
            let tiles = in_once.div_ceil(buffer_words);
            (in_once, w_once * tiles, out_once)
        }
    };
    Ok(TrafficEstimate {
        scheme,
        buffer_words,
        in_words,
        w_words,
        out_words,
        total_words: in_words + w_words + out_words,
    })
}
