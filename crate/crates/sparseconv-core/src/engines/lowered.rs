//! Lowered convolution: unfold input windows into a matrix, then multiply
//! by the filter bank (dense or CSR).

use std::time::Instant;

use super::{
    check_csr_unstretched, check_input_dims, check_weight_dims, ConvResult, EngineError, Matrix,
};
use crate::sparse::CsrMatrix;
use crate::tensor::{ConvShape, Tensor4D};

/// Unfold one batch sample into the `(c*r*s) x (e*f)` lowered matrix.
///
/// Row `(cc*r + rr)*s + ss`, column `y*f + x` holds
/// `input[sample][cc][y*stride + rr - pad][x*stride + ss - pad]`, or zero
/// where that falls outside the input. Interior input elements are
/// duplicated up to `r*s` times.
pub fn im2col_sample(
    input: &Tensor4D,
    sample: usize,
    shape: &ConvShape,
) -> Result<Matrix, EngineError> {
    check_input_dims(input, shape.input_dims())?;
    let (e, f) = shape.output_dims();
    let ef = e * f;
    let (h, w) = (shape.h(), shape.w());
    let (pad, stride) = (shape.pad(), shape.stride());
    let mut out = Matrix::zeros(shape.kernel_cols(), ef);
    let mut row = 0;
    for cc in 0..shape.c() {
        for rr in 0..shape.r() {
            for ss in 0..shape.s() {
                let dst = &mut out.data[row * ef..(row + 1) * ef];
                for y in 0..e {
                    let iy = y * stride + rr;
                    if iy < pad || iy - pad >= h {
                        continue; // whole lowered row segment stays zero
                    }
                    for x in 0..f {
                        let ix = x * stride + ss;
                        if ix < pad || ix - pad >= w {
                            continue;
                        }
                        dst[y * f + x] = input.get(sample, cc, iy - pad, ix - pad);
                    }
                }
                row += 1;
            }
        }
    }
    Ok(out)
}

/// Lowered matrices for every batch sample, in batch order. Engines stream
/// one sample at a time instead to bound peak memory; this form exists for
/// inspection and tests.
pub fn im2col(input: &Tensor4D, shape: &ConvShape) -> Result<Vec<Matrix>, EngineError> {
    (0..shape.n()).map(|a| im2col_sample(input, a, shape)).collect()
}

/// Dense matrix product. Per output element the reduction runs in
/// ascending-`k` order, matching the `(c, r, s)` order of the direct
/// engine when `a` is a reshaped filter bank.
pub fn gemm(a: &Matrix, b: &Matrix) -> Result<Matrix, EngineError> {
    if a.cols != b.rows {
        return Err(EngineError::GemmDims {
            a_rows: a.rows,
            a_cols: a.cols,
            b_rows: b.rows,
            b_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    gemm_into(a.rows, a.cols, &a.data, b.cols, &b.data, &mut out.data);
    Ok(out)
}

/// `out += a * b` for row-major slices; `out` must be zeroed by the caller
/// for a plain product.
fn gemm_into(m: usize, k_dim: usize, a: &[f32], n_cols: usize, b: &[f32], out: &mut [f32]) {
    for i in 0..m {
        let out_row = &mut out[i * n_cols..(i + 1) * n_cols];
        for k in 0..k_dim {
            let aik = a[i * k_dim + k];
            let b_row = &b[k * n_cols..(k + 1) * n_cols];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
}

/// Sparse-times-dense matrix product. Per output element the reduction
/// follows ascending stored-column order.
pub fn csrmm(a: &CsrMatrix, b: &Matrix) -> Result<Matrix, EngineError> {
    if a.mode != crate::sparse::CsrMode::Unstretched {
        return Err(EngineError::ModeMismatch { need: "unstretched" });
    }
    if a.cols != b.rows {
        return Err(EngineError::GemmDims {
            a_rows: a.rows,
            a_cols: a.cols,
            b_rows: b.rows,
            b_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    csrmm_into(a, b.cols, &b.data, &mut out.data);
    Ok(out)
}

fn csrmm_into(a: &CsrMatrix, n_cols: usize, b: &[f32], out: &mut [f32]) {
    for i in 0..a.rows {
        let out_row = &mut out[i * n_cols..(i + 1) * n_cols];
        for j in a.rowptr[i]..a.rowptr[i + 1] {
            let v = a.value[j];
            let b_row = &b[a.colidx[j] * n_cols..(a.colidx[j] + 1) * n_cols];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += v * bv;
            }
        }
    }
}

/// Lowered dense convolution: per sample, im2col then multiply by the
/// filter bank reshaped to `m x (c*r*s)`. The `m x (e*f)` product lands
/// directly in the output tensor, whose per-sample slab has exactly that
/// layout.
pub fn conv_lowered_dense(
    input: &Tensor4D,
    weights: &Tensor4D,
    shape: &ConvShape,
) -> Result<ConvResult, EngineError> {
    check_input_dims(input, shape.input_dims())?;
    check_weight_dims(weights, shape)?;

    let start = Instant::now();
    let (m, crs) = (shape.m(), shape.kernel_cols());
    let (e, f) = shape.output_dims();
    let ef = e * f;
    let mut out = Tensor4D::zeros(shape.output_dims4());
    let mut macs: u64 = 0;
    for a in 0..shape.n() {
        let lowered = im2col_sample(input, a, shape)?;
        let slab = &mut out.data_mut()[a * m * ef..(a + 1) * m * ef];
        gemm_into(m, crs, weights.data(), ef, &lowered.data, slab);
        macs += (m * crs * ef) as u64;
    }
    Ok(ConvResult { output: out, flops: 2 * macs, elapsed: start.elapsed() })
}

/// Lowered sparse convolution: per sample, im2col then CSR-times-dense.
pub fn conv_lowered_sparse(
    input: &Tensor4D,
    csr: &CsrMatrix,
    shape: &ConvShape,
) -> Result<ConvResult, EngineError> {
    check_input_dims(input, shape.input_dims())?;
    check_csr_unstretched(csr, shape)?;

    let start = Instant::now();
    let m = shape.m();
    let (e, f) = shape.output_dims();
    let ef = e * f;
    let mut out = Tensor4D::zeros(shape.output_dims4());
    let mut macs: u64 = 0;
    for a in 0..shape.n() {
        let lowered = im2col_sample(input, a, shape)?;
        let slab = &mut out.data_mut()[a * m * ef..(a + 1) * m * ef];
        csrmm_into(csr, ef, &lowered.data, slab);
        macs += (csr.nnz() * ef) as u64;
    }
    Ok(ConvResult { output: out, flops: 2 * macs, elapsed: start.elapsed() })
}
