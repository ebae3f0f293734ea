//! CSR weight matrices, magnitude pruning, footprint accounting, and weight
//! stretching.
//!
//! A filter bank `[m, c, r, s]` flattens to a logical `m x (c*r*s)` kernel
//! matrix; [`dense_to_csr`] keeps only its nonzero entries. Before the
//! direct sparse engine can use the matrix, [`stretch_weights`] rewrites
//! every column index from kernel coordinates `(c, r, s)` into the flat
//! offset of that tap inside one padded input sample, so the engine's inner
//! loop needs only an addition to locate its operand. Stretching touches
//! nothing but `colidx`: `rowptr` and `value` stay bitwise identical and no
//! extra entries are created.

use std::fmt;

use crate::tensor::{layout_f, ConvShape, Tensor4D};

/// Errors from CSR construction, validation, and stretching.
#[derive(Debug, Clone, PartialEq)]
pub enum SparseError {
    RowptrLen { expected: usize, got: usize },
    RowptrStart { got: usize },
    RowptrEnd { expected: usize, got: usize },
    RowptrDecreasing { row: usize },
    ArrayLen { name: &'static str, expected: usize, got: usize },
    ColOutOfBounds { row: usize, col: usize, cols: usize },
    ColNotIncreasing { row: usize },
    StoredZero { row: usize, pos: usize },
    AlreadyStretched,
    KernelColsMismatch { expected: usize, got: usize },
}

impl fmt::Display for SparseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SparseError::RowptrLen { expected, got } => {
                write!(f, "rowptr length {got}, expected rows+1 = {expected}")
            }
            SparseError::RowptrStart { got } => write!(f, "rowptr[0] is {got}, must be 0"),
            SparseError::RowptrEnd { expected, got } => {
                write!(f, "rowptr[rows] is {got}, must equal nnz = {expected}")
            }
            SparseError::RowptrDecreasing { row } => {
                write!(f, "rowptr decreases at row {row}")
            }
            SparseError::ArrayLen { name, expected, got } => {
                write!(f, "{name} length {got}, expected {expected}")
            }
            SparseError::ColOutOfBounds { row, col, cols } => {
                write!(f, "column index {col} in row {row} out of bounds (cols = {cols})")
            }
            SparseError::ColNotIncreasing { row } => {
                write!(f, "column indices in row {row} are not strictly increasing")
            }
            SparseError::StoredZero { row, pos } => {
                write!(f, "stored value at row {row}, position {pos} is zero")
            }
            SparseError::AlreadyStretched => {
                write!(f, "weight matrix is already stretched")
            }
            SparseError::KernelColsMismatch { expected, got } => {
                write!(f, "weight matrix has {got} columns, shape expects c*r*s = {expected}")
            }
        }
    }
}

impl std::error::Error for SparseError {}

/// Whether column indices are kernel coordinates or padded-input offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsrMode {
    /// `colidx` is a kernel-space index `(c*r_dim + r)*s_dim + s`.
    Unstretched,
    /// `colidx` is a padded-input offset `(c*h_pad + r)*w_pad + s`.
    Stretched { h_pad: usize, w_pad: usize },
}

/// Compressed sparse row weight matrix.
///
/// `rowptr` has `rows + 1` entries with `rowptr[i]..rowptr[i+1]` delimiting
/// the stored elements of row `i`; `colidx` is strictly increasing within
/// each row and below `cols`; stored values are nonzero.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub rows: usize,
    /// Column extent the indices are bounded by: `c*r*s` unstretched,
    /// `c*h_pad*w_pad` stretched.
    pub cols: usize,
    pub rowptr: Vec<usize>,
    pub colidx: Vec<usize>,
    pub value: Vec<f32>,
    pub mode: CsrMode,
    /// Logical kernel-matrix column count (`c*r*s`), kept across
    /// stretching so sparsity stays defined on the kernel matrix. Falls
    /// back to `cols` when a stretched matrix is rebuilt from raw parts
    /// (e.g. loaded from a file that does not record it).
    kernel_cols: usize,
}

// Equality ignores `kernel_cols` (an annotation, not part of the stored
// matrix) and compares values bitwise so round-trip tests are exact.
impl PartialEq for CsrMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.rowptr == other.rowptr
            && self.colidx == other.colidx
            && self.mode == other.mode
            && self.value.len() == other.value.len()
            && self
                .value
                .iter()
                .zip(&other.value)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl CsrMatrix {
    /// Assemble from raw parts, validating every invariant.
    pub fn new(
        rows: usize,
        cols: usize,
        rowptr: Vec<usize>,
        colidx: Vec<usize>,
        value: Vec<f32>,
        mode: CsrMode,
    ) -> Result<Self, SparseError> {
        let m = CsrMatrix { rows, cols, rowptr, colidx, value, mode, kernel_cols: cols };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), SparseError> {
        if self.rowptr.len() != self.rows + 1 {
            return Err(SparseError::RowptrLen {
                expected: self.rows + 1,
                got: self.rowptr.len(),
            });
        }
        if self.rowptr[0] != 0 {
            return Err(SparseError::RowptrStart { got: self.rowptr[0] });
        }
        let nnz = self.colidx.len();
        if self.value.len() != nnz {
            return Err(SparseError::ArrayLen {
                name: "value",
                expected: nnz,
                got: self.value.len(),
            });
        }
        if self.rowptr[self.rows] != nnz {
            return Err(SparseError::RowptrEnd { expected: nnz, got: self.rowptr[self.rows] });
        }
        // Monotonicity first: together with the start/end checks it bounds
        // every rowptr entry by nnz, making the element scan below safe.
        for i in 0..self.rows {
            if self.rowptr[i + 1] < self.rowptr[i] {
                return Err(SparseError::RowptrDecreasing { row: i });
            }
        }
        for i in 0..self.rows {
            let mut prev: Option<usize> = None;
            for j in self.rowptr[i]..self.rowptr[i + 1] {
                let col = self.colidx[j];
                if col >= self.cols {
                    return Err(SparseError::ColOutOfBounds { row: i, col, cols: self.cols });
                }
                if let Some(p) = prev {
                    if col <= p {
                        return Err(SparseError::ColNotIncreasing { row: i });
                    }
                }
                prev = Some(col);
                if self.value[j] == 0.0 {
                    return Err(SparseError::StoredZero { row: i, pos: j - self.rowptr[i] });
                }
            }
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.colidx.len()
    }

    /// Logical kernel-matrix column count (`c*r*s`).
    pub fn kernel_cols(&self) -> usize {
        self.kernel_cols
    }

    /// Fraction of zero cells in the logical `rows x kernel_cols` kernel
    /// matrix, independent of stretching.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.nnz() as f64 / (self.rows * self.kernel_cols) as f64
    }

    /// Storage accounting model: 4 bytes per value, per column index, and
    /// per rowptr entry, i.e. `(2*nnz + rows + 1) * 4`.
    pub fn footprint_bytes(&self) -> usize {
        (2 * self.nnz() + self.rows + 1) * 4
    }
}

/// Convert a `[m, c, r, s]` filter bank to CSR, dropping exact zeros.
/// Row `i` is filter `i` flattened in `(c, r, s)` order, so kernel-space
/// column indices come out strictly increasing.
pub fn dense_to_csr(weights: &Tensor4D) -> CsrMatrix {
    let [m, c, r, s] = weights.dims();
    let cols = c * r * s;
    let mut rowptr = Vec::with_capacity(m + 1);
    let mut colidx = Vec::new();
    let mut value = Vec::new();
    rowptr.push(0);
    for i in 0..m {
        let row = &weights.data()[i * cols..(i + 1) * cols];
        for (k, &v) in row.iter().enumerate() {
            if v != 0.0 {
                colidx.push(k);
                value.push(v);
            }
        }
        rowptr.push(colidx.len());
    }
    CsrMatrix { rows: m, cols, rowptr, colidx, value, mode: CsrMode::Unstretched, kernel_cols: cols }
}

/// Densify back to a row-major `rows x cols` array (zeros where nothing is
/// stored). Inverse of [`dense_to_csr`] up to the 4-D reshape.
pub fn csr_to_dense(csr: &CsrMatrix) -> Vec<f32> {
    let mut out = vec![0.0f32; csr.rows * csr.cols];
    for i in 0..csr.rows {
        for j in csr.rowptr[i]..csr.rowptr[i + 1] {
            out[i * csr.cols + csr.colidx[j]] = csr.value[j];
        }
    }
    out
}

/// Zero the smallest-magnitude elements until the zero fraction reaches
/// `target_sparsity`: exactly `ceil(target_sparsity * total)` elements are
/// zeroed, so the achieved sparsity is at least the target and overshoots
/// by less than one element count. Ties at the cutoff magnitude are broken
/// by zeroing the smaller flat index first, which makes the operation
/// deterministic and idempotent at a fixed target.
///
/// `target_sparsity` must lie in `[0, 1)`.
pub fn prune_by_magnitude(weights: &Tensor4D, target_sparsity: f64) -> Tensor4D {
    assert!(
        (0.0..1.0).contains(&target_sparsity),
        "target sparsity {target_sparsity} outside [0, 1)"
    );
    let mut out = weights.clone();
    let total = out.len();
    let k = ((target_sparsity * total as f64).ceil() as usize).min(total);
    if k == 0 {
        return out;
    }
    let mut order: Vec<usize> = (0..total).collect();
    let data = out.data_mut();
    order.sort_by(|&a, &b| data[a].abs().total_cmp(&data[b].abs()).then(a.cmp(&b)));
    for &idx in &order[..k] {
        data[idx] = 0.0;
    }
    out
}

/// Rewrite kernel-space column indices into padded-input offsets for
/// `shape`: index `k` decomposes as `(c, r, s)` with `c = k/(r_dim*s_dim)`,
/// `r = (k % (r_dim*s_dim))/s_dim`, `s = k % s_dim`, and maps to
/// `layout_f(c, r, s, h_pad, w_pad)`.
///
/// The map is strictly increasing in `k`, so per-row ordering survives;
/// `rowptr` and `value` are copied bitwise; nnz is unchanged.
pub fn stretch_weights(csr: &CsrMatrix, shape: &ConvShape) -> Result<CsrMatrix, SparseError> {
    if csr.mode != CsrMode::Unstretched {
        return Err(SparseError::AlreadyStretched);
    }
    if csr.cols != shape.kernel_cols() {
        return Err(SparseError::KernelColsMismatch {
            expected: shape.kernel_cols(),
            got: csr.cols,
        });
    }
    let (r_dim, s_dim) = (shape.r(), shape.s());
    let (h_pad, w_pad) = (shape.h_pad(), shape.w_pad());
    let colidx = csr
        .colidx
        .iter()
        .map(|&k| {
            let c = k / (r_dim * s_dim);
            let r = (k % (r_dim * s_dim)) / s_dim;
            let s = k % s_dim;
            layout_f(c, r, s, h_pad, w_pad)
        })
        .collect();
    Ok(CsrMatrix {
        rows: csr.rows,
        cols: shape.c() * h_pad * w_pad,
        rowptr: csr.rowptr.clone(),
        colidx,
        value: csr.value.clone(),
        mode: CsrMode::Stretched { h_pad, w_pad },
        kernel_cols: csr.kernel_cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng64;

    fn random_pruned(dims: [usize; 4], seed: u64, sparsity: f64) -> Tensor4D {
        prune_by_magnitude(&Tensor4D::random(dims, seed, 1.0), sparsity)
    }

    #[test]
    fn all_zero_weights_give_empty_csr() {
        let w = Tensor4D::zeros([2, 1, 2, 2]);
        let csr = dense_to_csr(&w);
        assert_eq!(csr.nnz(), 0);
        assert_eq!(csr.rowptr, vec![0, 0, 0]);
        assert_eq!(csr.sparsity(), 1.0);
        csr.validate().unwrap();
    }

    #[test]
    fn identity_matrix_csr() {
        // 3x3 identity viewed as m=3 filters of c=3, r=s=1.
        let mut w = Tensor4D::zeros([3, 3, 1, 1]);
        for i in 0..3 {
            w.set(i, i, 0, 0, 1.0);
        }
        let csr = dense_to_csr(&w);
        assert_eq!(csr.rowptr, vec![0, 1, 2, 3]);
        assert_eq!(csr.colidx, vec![0, 1, 2]);
        assert_eq!(csr.value, vec![1.0, 1.0, 1.0]);
        assert_eq!(csr.sparsity(), 1.0 - 3.0 / 9.0);
    }

    #[test]
    fn dense_csr_round_trip_is_bitwise() {
        let w = random_pruned([8, 4, 3, 3], 3, 0.7);
        let csr = dense_to_csr(&w);
        csr.validate().unwrap();
        let back = csr_to_dense(&csr);
        assert_eq!(back.len(), w.len());
        for (a, b) in back.iter().zip(w.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn prune_target_zero_is_identity() {
        let w = Tensor4D::random([2, 3, 3, 3], 9, 1.0);
        assert_eq!(prune_by_magnitude(&w, 0.0), w);
    }

    #[test]
    fn prune_small_example() {
        let w = Tensor4D::from_vec([1, 1, 1, 4], vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        let p = prune_by_magnitude(&w, 0.5);
        assert_eq!(p.data(), &[0.0, 0.0, 3.0, -4.0]);
    }

    #[test]
    fn prune_breaks_ties_by_lower_index() {
        let w = Tensor4D::from_vec([1, 1, 1, 4], vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        let p = prune_by_magnitude(&w, 0.5);
        assert_eq!(p.data(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn prune_hits_target_within_one_element() {
        for seed in [1u64, 2, 3] {
            let w = Tensor4D::random([4, 4, 3, 3], seed, 1.0);
            let total = w.len() as f64;
            let p = prune_by_magnitude(&w, 0.8);
            let zeros = p.data().iter().filter(|&&v| v == 0.0).count() as f64;
            let s = zeros / total;
            assert!((0.8..0.8 + 1.0 / total + 1e-12).contains(&s), "sparsity {s}");
        }
    }

    #[test]
    fn prune_is_idempotent() {
        for target in [0.3, 0.5, 0.9] {
            let w = Tensor4D::random([3, 2, 3, 3], 17, 1.0);
            let once = prune_by_magnitude(&w, target);
            let twice = prune_by_magnitude(&once, target);
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn sparsity_ratio_examples() {
        // rows=10, kernel_cols=100, nnz=150 -> 0.85.
        let mut rowptr = vec![0usize];
        let mut colidx = Vec::new();
        for _ in 0..10 {
            colidx.extend(0..15usize);
            rowptr.push(colidx.len());
        }
        let csr = CsrMatrix::new(10, 100, rowptr, colidx, vec![1.0; 150], CsrMode::Unstretched)
            .unwrap();
        assert_eq!(csr.sparsity(), 0.85);

        let dense = dense_to_csr(&Tensor4D::from_vec([1, 1, 2, 2], vec![1.0; 4]).unwrap());
        assert_eq!(dense.sparsity(), 0.0);
    }

    #[test]
    fn footprint_formula() {
        let empty =
            CsrMatrix::new(1, 4, vec![0, 0], vec![], vec![], CsrMode::Unstretched).unwrap();
        assert_eq!(empty.footprint_bytes(), 8);

        let mut rowptr = vec![0usize];
        let mut colidx = Vec::new();
        for _ in 0..10 {
            colidx.extend(0..10usize);
            rowptr.push(colidx.len());
        }
        let csr = CsrMatrix::new(10, 20, rowptr, colidx, vec![1.0; 100], CsrMode::Unstretched)
            .unwrap();
        assert_eq!(csr.footprint_bytes(), 844);
    }

    #[test]
    fn high_sparsity_beats_40_percent_of_dense() {
        // At sparsity > 0.8 the CSR footprint stays under 40% of the dense
        // 4-bytes-per-cell matrix.
        for (m, c) in [(8usize, 8usize), (16, 16), (32, 8)] {
            for target in [0.82, 0.9, 0.95] {
                let w = random_pruned([m, c, 3, 3], 5, target);
                let csr = dense_to_csr(&w);
                let dense_bytes = 4 * m * c * 9;
                assert!(
                    csr.footprint_bytes() < (0.4 * dense_bytes as f64) as usize,
                    "m={m} c={c} target={target}: {} vs dense {}",
                    csr.footprint_bytes(),
                    dense_bytes
                );
            }
        }
    }

    #[test]
    fn stretch_rewrites_only_colidx() {
        // 3x3 filter (c=1) over a 6x6 input, pad 0: kernel index 5 is
        // (r=1, s=2) and lands at (0*6+1)*6+2 = 8.
        let mut w = Tensor4D::zeros([1, 1, 3, 3]);
        w.set(0, 0, 1, 2, 2.5);
        let csr = dense_to_csr(&w);
        assert_eq!(csr.colidx, vec![5]);
        let shape = ConvShape::simple(1, 1, 1, 6, 6, 3, 3).unwrap();
        let st = stretch_weights(&csr, &shape).unwrap();
        assert_eq!(st.colidx, vec![8]);
        assert_eq!(st.rowptr, csr.rowptr);
        assert_eq!(st.value[0].to_bits(), csr.value[0].to_bits());
        assert_eq!(st.cols, 36);
        assert_eq!(st.mode, CsrMode::Stretched { h_pad: 6, w_pad: 6 });
        assert_eq!(st.kernel_cols(), 9);
        assert_eq!(st.sparsity(), csr.sparsity());
        st.validate().unwrap();
    }

    #[test]
    fn stretch_of_pointwise_filter_keeps_index_zero() {
        let w = Tensor4D::from_vec([1, 1, 1, 1], vec![3.0]).unwrap();
        let csr = dense_to_csr(&w);
        let shape = ConvShape::simple(1, 1, 1, 4, 4, 1, 1).unwrap();
        let st = stretch_weights(&csr, &shape).unwrap();
        assert_eq!(st.colidx, vec![0]);
    }

    #[test]
    fn stretch_preserves_order_and_reconstructs_coordinates() {
        let mut rng = Rng64::new(99);
        for _ in 0..20 {
            let m = rng.usize_in(1, 6);
            let c = rng.usize_in(1, 4);
            let r = *rng.choose(&[1usize, 3, 5]);
            let s = *rng.choose(&[1usize, 3, 5]);
            let h = rng.usize_in(r.max(3), 12);
            let w = rng.usize_in(s.max(3), 12);
            let pad = rng.usize_in(0, 2);
            let shape = ConvShape::new(1, m, c, h, w, r, s, 1, pad).unwrap();
            let weights = random_pruned([m, c, r, s], rng.next_u64(), 0.5);
            let csr = dense_to_csr(&weights);
            let st = stretch_weights(&csr, &shape).unwrap();
            st.validate().unwrap(); // includes strict per-row ordering
            assert_eq!(st.rowptr, csr.rowptr);
            for (j, &k) in csr.colidx.iter().enumerate() {
                let (cc, rr, ss) = (k / (r * s), (k % (r * s)) / s, k % s);
                assert_eq!(st.colidx[j], layout_f(cc, rr, ss, shape.h_pad(), shape.w_pad()));
            }
        }
    }

    #[test]
    fn stretch_rejects_stretched_input_and_wrong_cols() {
        let w = random_pruned([2, 1, 3, 3], 1, 0.5);
        let csr = dense_to_csr(&w);
        let shape = ConvShape::simple(1, 2, 1, 6, 6, 3, 3).unwrap();
        let st = stretch_weights(&csr, &shape).unwrap();
        assert_eq!(stretch_weights(&st, &shape), Err(SparseError::AlreadyStretched));

        let other = ConvShape::simple(1, 2, 2, 6, 6, 3, 3).unwrap();
        assert!(matches!(
            stretch_weights(&csr, &other),
            Err(SparseError::KernelColsMismatch { expected: 18, got: 9 })
        ));
    }

    #[test]
    fn validate_reports_each_invariant() {
        let bad =
            CsrMatrix::new(3, 4, vec![0, 2, 1, 2], vec![0, 1], vec![1.0, 1.0], CsrMode::Unstretched);
        assert_eq!(bad.unwrap_err(), SparseError::RowptrDecreasing { row: 1 });

        let bad = CsrMatrix::new(1, 4, vec![0, 1], vec![4], vec![1.0], CsrMode::Unstretched);
        assert_eq!(bad.unwrap_err(), SparseError::ColOutOfBounds { row: 0, col: 4, cols: 4 });

        let bad = CsrMatrix::new(1, 4, vec![0, 2], vec![2, 2], vec![1.0, 1.0], CsrMode::Unstretched);
        assert_eq!(bad.unwrap_err(), SparseError::ColNotIncreasing { row: 0 });

        let bad = CsrMatrix::new(1, 4, vec![0, 1], vec![0], vec![0.0], CsrMode::Unstretched);
        assert_eq!(bad.unwrap_err(), SparseError::StoredZero { row: 0, pos: 0 });

        let bad = CsrMatrix::new(2, 4, vec![0, 1], vec![0], vec![1.0], CsrMode::Unstretched);
        assert_eq!(bad.unwrap_err(), SparseError::RowptrLen { expected: 3, got: 2 });

        let bad = CsrMatrix::new(1, 4, vec![1, 1], vec![], vec![], CsrMode::Unstretched);
        assert_eq!(bad.unwrap_err(), SparseError::RowptrStart { got: 1 });

        let bad = CsrMatrix::new(1, 4, vec![0, 2], vec![0], vec![1.0], CsrMode::Unstretched);
        assert_eq!(bad.unwrap_err(), SparseError::RowptrEnd { expected: 1, got: 2 });
    }
}
