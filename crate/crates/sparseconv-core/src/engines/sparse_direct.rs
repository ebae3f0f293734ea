//! Direct sparse convolution over stretched CSR weights.
//!
//! Each stored weight's stretched column index is already the flat offset
//! of its tap inside one padded input sample, so the inner loop computes
//! input addresses by addition alone: output position `(y, x)` reads
//! `off + y*stride*w_pad + x*stride`. Zero weights are never touched, so
//! the executed MAC count is `n * nnz * e * f`.

use std::time::Instant;

use super::{check_csr_stretched, check_input_dims, ConvResult, EngineError};
use crate::sparse::CsrMatrix;
use crate::tensor::{ConvShape, Tensor4D};

/// Accumulate every stored weight of one filter row into one output
/// channel (`e*f` elements, already zeroed). Contributions to each output
/// element arrive in ascending stored-element order — the fixed
/// accumulation order that makes sequential and parallel runs bitwise
/// equal.
#[allow(clippy::too_many_arguments)]
fn accumulate_channel(
    in_sample: &[f32],
    colidx: &[usize],
    value: &[f32],
    out_chan: &mut [f32],
    e: usize,
    f: usize,
    stride: usize,
    w_pad: usize,
) {
    // Row-wise slice pairs instead of indexed accesses: the exact-length
    // zips drop the per-element bounds checks and let the stride-1 case
    // vectorize. The value computed per (y, x) and the order contributions
    // reach each output element are unchanged.
    if stride == 1 {
        for (&off, &val) in colidx.iter().zip(value) {
            for y in 0..e {
                let in_row = &in_sample[off + y * w_pad..off + y * w_pad + f];
                let out_row = &mut out_chan[y * f..(y + 1) * f];
                for (o, &i) in out_row.iter_mut().zip(in_row) {
                    *o += val * i;
                }
            }
        }
    } else {
        for (&off, &val) in colidx.iter().zip(value) {
            for y in 0..e {
                let row_base = off + y * stride * w_pad;
                let in_row = &in_sample[row_base..row_base + (f - 1) * stride + 1];
                let out_row = &mut out_chan[y * f..(y + 1) * f];
                for (o, i) in out_row.iter_mut().zip(in_row.iter().step_by(stride)) {
                    *o += val * i;
                }
            }
        }
    }
}

/// Sequential direct sparse convolution.
///
/// `input_padded` must already carry the shape's zero padding (dims
/// `[n, c, h+2*pad, w+2*pad]`); padding is an offline step here, like the
/// weight stretching.
pub fn conv_sparse_direct(
    input_padded: &Tensor4D,
    csr: &CsrMatrix,
    shape: &ConvShape,
) -> Result<ConvResult, EngineError> {
    check_input_dims(input_padded, shape.padded_input_dims())?;
    check_csr_stretched(csr, shape)?;

    let start = Instant::now();
    let (e, f) = shape.output_dims();
    let ef = e * f;
    let m = shape.m();
    let sample_len = shape.c() * shape.h_pad() * shape.w_pad();
    let (stride, w_pad) = (shape.stride(), shape.w_pad());
    let in_data = input_padded.data();

    let mut out = Tensor4D::zeros(shape.output_dims4());
    let mut macs: u64 = 0;
    for (chan, out_chan) in out.data_mut().chunks_mut(ef).enumerate() {
        let (a, mm) = (chan / m, chan % m);
        let (lo, hi) = (csr.rowptr[mm], csr.rowptr[mm + 1]);
        accumulate_channel(
            &in_data[a * sample_len..(a + 1) * sample_len],
            &csr.colidx[lo..hi],
            &csr.value[lo..hi],
            out_chan,
            e,
            f,
            stride,
            w_pad,
        );
        macs += ((hi - lo) * ef) as u64;
    }
    Ok(ConvResult { output: out, flops: 2 * macs, elapsed: start.elapsed() })
}

/// Direct sparse convolution with the work split over `workers` threads.
///
/// The unit of distribution is one `(sample, filter)` output channel: the
/// `n*m` channels are cut into contiguous runs, one run per thread, and
/// each channel is written by exactly one thread running the same
/// per-channel loop as the sequential engine. No output element has two
/// writers and no accumulation order changes, so the result is bitwise
/// identical to [`conv_sparse_direct`] for every worker count.
pub fn conv_sparse_direct_parallel(
    input_padded: &Tensor4D,
    csr: &CsrMatrix,
    shape: &ConvShape,
    workers: usize,
) -> Result<ConvResult, EngineError> {
    if workers == 0 {
        return Err(EngineError::ZeroWorkers);
    }
    check_input_dims(input_padded, shape.padded_input_dims())?;
    check_csr_stretched(csr, shape)?;

    let start = Instant::now();
    let (e, f) = shape.output_dims();
    let ef = e * f;
    let m = shape.m();
    let sample_len = shape.c() * shape.h_pad() * shape.w_pad();
    let (stride, w_pad) = (shape.stride(), shape.w_pad());
    let in_data = input_padded.data();
    let channels = shape.n() * m;
    let per_worker = channels.div_ceil(workers);

    let mut out = Tensor4D::zeros(shape.output_dims4());
    let mut macs: u64 = 0;
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        let mut rest = out.data_mut();
        let mut first_chan = 0;
        while first_chan < channels {
            let take = per_worker.min(channels - first_chan);
            let (mine, tail) = std::mem::take(&mut rest).split_at_mut(take * ef);
            rest = tail;
            let base = first_chan;
            handles.push(scope.spawn(move || {
                let mut macs: u64 = 0;
                for (i, out_chan) in mine.chunks_mut(ef).enumerate() {
                    let chan = base + i;
                    let (a, mm) = (chan / m, chan % m);
                    let (lo, hi) = (csr.rowptr[mm], csr.rowptr[mm + 1]);
                    accumulate_channel(
                        &in_data[a * sample_len..(a + 1) * sample_len],
                        &csr.colidx[lo..hi],
                        &csr.value[lo..hi],
                        out_chan,
                        e,
                        f,
                        stride,
                        w_pad,
                    );
                    macs += ((hi - lo) * ef) as u64;
                }
                macs
            }));
            first_chan += take;
        }
        for handle in handles {
            macs += handle.join().expect("convolution worker panicked");
        }
    });
    Ok(ConvResult { output: out, flops: 2 * macs, elapsed: start.elapsed() })
}
