//! Direct dense convolution: the reference oracle.

use std::time::Instant;

use super::{check_input_dims, check_weight_dims, ConvResult, EngineError};
use crate::tensor::{pad_input, ConvShape, Tensor4D};

/// Sliding-window convolution as one 7-deep loop nest over
/// `(n, m, e, f) x (c, r, s)`, with the reduction accumulated in ascending
/// `(c, r, s)` order per output element.
///
/// The input is padded internally (the other dense path zero-fills during
/// lowering instead), which keeps the inner loops branch-free and makes the
/// executed MAC count exactly `n*m*c*r*s*e*f`: adding a zero-padded term
/// neither branches nor changes the accumulator value.
pub fn conv_dense_direct(
    input: &Tensor4D,
    weights: &Tensor4D,
    shape: &ConvShape,
) -> Result<ConvResult, EngineError> {
    check_input_dims(input, shape.input_dims())?;
    check_weight_dims(weights, shape)?;

    let start = Instant::now();
    let padded = pad_input(input, shape.pad());
    let (n, m, c) = (shape.n(), shape.m(), shape.c());
    let (r, s, stride) = (shape.r(), shape.s(), shape.stride());
    let (e, f) = shape.output_dims();

    let mut out = Tensor4D::zeros(shape.output_dims4());
    let mut macs: u64 = 0;
    let reduction = (c * r * s) as u64;
    for a in 0..n {
        for mm in 0..m {
            for y in 0..e {
                for x in 0..f {
                    let mut acc = 0.0f32;
                    for cc in 0..c {
                        for rr in 0..r {
                            let in_base = padded.flat(a, cc, y * stride + rr, x * stride);
                            let w_base = weights.flat(mm, cc, rr, 0);
                            for ss in 0..s {
                                acc += weights.data()[w_base + ss]
                                    * padded.data()[in_base + ss];
                            }
                        }
                    }
                    out.set(a, mm, y, x, acc);
                    macs += reduction;
                }
            }
        }
    }

    Ok(ConvResult { output: out, flops: 2 * macs, elapsed: start.elapsed() })
}
