//! Shape arithmetic, dense 4-D tensor storage, and deterministic data
//! generation.
//!
//! Activations and weights live in flat `f32` arrays with a row-major
//! N-C-H-W layout: element `(a, b, y, x)` of a tensor with extents
//! `[D0, D1, D2, D3]` sits at offset `((a*D1 + b)*D2 + y)*D3 + x`. The
//! innermost dimension is contiguous, so lane-consecutive output positions
//! are memory-consecutive. Within one channel plane the offset of `(c, y, x)`
//! is [`layout_f`], the additive layout function used by weight stretching
//! and the direct sparse engine.

use std::fmt;

/// Errors from shape construction and tensor assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeError {
    /// A parameter that must be at least 1 was 0.
    ZeroParam { name: &'static str },
    /// The filter does not fit inside the padded input.
    EmptyOutput { h_eff: usize, w_eff: usize, r: usize, s: usize },
    /// Flat data length does not match the dimension product.
    DataLength { expected: usize, got: usize },
}

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeError::ZeroParam { name } => write!(f, "shape parameter `{name}` must be >= 1"),
            ShapeError::EmptyOutput { h_eff, w_eff, r, s } => write!(
                f,
                "filter {r}x{s} does not fit in padded input {h_eff}x{w_eff} (output would be empty)"
            ),
            ShapeError::DataLength { expected, got } => {
                write!(f, "data length {got} does not match dims product {expected}")
            }
        }
    }
}

impl std::error::Error for ShapeError {}

/// The shape parameters of one convolutional layer: batch `n`, filters `m`,
/// input channels `c`, input extent `h x w`, filter extent `r x s`, plus
/// stride and zero padding per side.
///
/// Output extents `e x f` are derived at construction:
/// `e = (h + 2*pad - r)/stride + 1` (floored), likewise `f`. With stride 1
/// and pad 0 this is `e = h - r + 1`, `f = w - s + 1`. Construction fails
/// if either would be < 1, so a `ConvShape` is always executable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    n: usize,
    m: usize,
    c: usize,
    h: usize,
    w: usize,
    r: usize,
    s: usize,
    stride: usize,
    pad: usize,
    e: usize,
    f: usize,
}

impl ConvShape {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        m: usize,
        c: usize,
        h: usize,
        w: usize,
        r: usize,
        s: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self, ShapeError> {
        for (name, v) in [
            ("n", n),
            ("m", m),
            ("c", c),
            ("h", h),
            ("w", w),
            ("r", r),
            ("s", s),
            ("stride", stride),
        ] {
            if v == 0 {
                return Err(ShapeError::ZeroParam { name });
            }
        }
        let h_eff = h + 2 * pad;
        let w_eff = w + 2 * pad;
        if h_eff < r || w_eff < s {
            return Err(ShapeError::EmptyOutput { h_eff, w_eff, r, s });
        }
        let e = (h_eff - r) / stride + 1;
        let f = (w_eff - s) / stride + 1;
        Ok(ConvShape { n, m, c, h, w, r, s, stride, pad, e, f })
    }

    /// Stride-1, pad-0 shorthand.
    pub fn simple(
        n: usize,
        m: usize,
        c: usize,
        h: usize,
        w: usize,
        r: usize,
        s: usize,
    ) -> Result<Self, ShapeError> {
        Self::new(n, m, c, h, w, r, s, 1, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn c(&self) -> usize {
        self.c
    }
    pub fn h(&self) -> usize {
        self.h
    }
    pub fn w(&self) -> usize {
        self.w
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn stride(&self) -> usize {
        self.stride
    }
    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Output height and width `(e, f)`.
    pub fn output_dims(&self) -> (usize, usize) {
        (self.e, self.f)
    }
    pub fn e(&self) -> usize {
        self.e
    }
    pub fn f(&self) -> usize {
        self.f
    }

    /// Padded input height `h + 2*pad`.
    pub fn h_pad(&self) -> usize {
        self.h + 2 * self.pad
    }
    /// Padded input width `w + 2*pad`.
    pub fn w_pad(&self) -> usize {
        self.w + 2 * self.pad
    }

    /// Column extent of the flattened kernel matrix: `c*r*s`.
    pub fn kernel_cols(&self) -> usize {
        self.c * self.r * self.s
    }

    pub fn input_dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }
    pub fn padded_input_dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h_pad(), self.w_pad()]
    }
    pub fn weight_dims(&self) -> [usize; 4] {
        [self.m, self.c, self.r, self.s]
    }
    pub fn output_dims4(&self) -> [usize; 4] {
        [self.n, self.m, self.e, self.f]
    }
}

/// Offset of element `(c, y, x)` inside a flat channel-major plane array of
/// extent `h_in x w_in` per channel: `(c*h_in + y)*w_in + x`.
///
/// The map is additive: `layout_f(c, y+r, x+s, ..) = layout_f(c, y, x, ..)
/// + layout_f(0, r, s, ..)` whenever both points are in bounds, which is
/// what lets stretched weight indices be combined with a sliding output
/// position by plain addition.
#[inline]
pub fn layout_f(c: usize, y: usize, x: usize, h_in: usize, w_in: usize) -> usize {
    debug_assert!(y < h_in && x < w_in);
    (c * h_in + y) * w_in + x
}

/// Dense 4-D tensor of `f32` values in row-major order (innermost = last
/// dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4D {
    dims: [usize; 4],
    data: Vec<f32>,
}

impl Tensor4D {
    pub fn zeros(dims: [usize; 4]) -> Self {
        let len = dims.iter().product();
        Tensor4D { dims, data: vec![0.0; len] }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f32>) -> Result<Self, ShapeError> {
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(ShapeError::DataLength { expected, got: data.len() });
        }
        Ok(Tensor4D { dims, data })
    }

    /// Tensor filled with values uniform in `[-range, range)`, generated by
    /// [`Rng64`] from `seed`. Identical `(dims, seed, range)` always yield
    /// identical tensors.
    pub fn random(dims: [usize; 4], seed: u64, range: f32) -> Self {
        let len = dims.iter().product();
        let mut rng = Rng64::new(seed);
        let data = (0..len).map(|_| rng.uniform(range)).collect();
        Tensor4D { dims, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Flat offset of `(a, b, y, x)`.
    #[inline]
    pub fn flat(&self, a: usize, b: usize, y: usize, x: usize) -> usize {
        let [_, d1, d2, d3] = self.dims;
        ((a * d1 + b) * d2 + y) * d3 + x
    }

    /// Inverse of [`Tensor4D::flat`].
    pub fn unflatten(&self, idx: usize) -> [usize; 4] {
        let [_, d1, d2, d3] = self.dims;
        let x = idx % d3;
        let rest = idx / d3;
        let y = rest % d2;
        let rest = rest / d2;
        let b = rest % d1;
        let a = rest / d1;
        [a, b, y, x]
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, y: usize, x: usize) -> f32 {
        self.data[self.flat(a, b, y, x)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, y: usize, x: usize, v: f32) {
        let i = self.flat(a, b, y, x);
        self.data[i] = v;
    }
}

/// Copy `input` (dims `[n, c, h, w]`) into a fresh `[n, c, h+2*pad,
/// w+2*pad]` tensor with a zero border ring of width `pad` on every side.
/// `pad = 0` returns a bitwise-equal copy.
pub fn pad_input(input: &Tensor4D, pad: usize) -> Tensor4D {
    if pad == 0 {
        return input.clone();
    }
    let [n, c, h, w] = input.dims();
    let mut out = Tensor4D::zeros([n, c, h + 2 * pad, w + 2 * pad]);
    for a in 0..n {
        for b in 0..c {
            for y in 0..h {
                let src = input.flat(a, b, y, 0);
                let dst = out.flat(a, b, y + pad, pad);
                out.data[dst..dst + w].copy_from_slice(&input.data[src..src + w]);
            }
        }
    }
    out
}

/// SplitMix64 pseudo-random generator.
///
/// The full algorithm, so sequences are reproducible on any platform:
/// each step adds the constant `0x9E3779B97F4A7C15` to the 64-bit state,
/// then mixes the incremented state with
/// `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
/// z *= 0x94D049BB133111EB; z ^= z >> 31` (all wrapping). Floats take the
/// top 24 bits of the output scaled by 2^-24, giving uniform values in
/// `[0, 1)`.
#[derive(Debug, Clone)]
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 24 bits of resolution.
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / (1u32 << 24) as f32)
    }

    /// Uniform in `[-range, range)`.
    pub fn uniform(&mut self, range: f32) -> f32 {
        -range + 2.0 * range * self.next_f32()
    }

    /// Uniform integer in `[lo, hi]` inclusive. Uses a plain modulus; the
    /// bias is irrelevant for test-data sampling.
    pub fn usize_in(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as u64;
        lo + (self.next_u64() % span) as usize
    }

    /// Pick one element of a slice.
    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.usize_in(0, items.len() - 1)]
    }
}
