//! Binary weight-file format (`.escn`).
//!
//! Little-endian layout, bit-exact on round trip:
//!
//! | field   | type            | notes                                   |
//! |---------|-----------------|-----------------------------------------|
//! | magic   | 4 bytes         | `ESCN`                                  |
//! | version | u32             | 1                                       |
//! | flags   | u32             | bit 0 = stretched; other bits reserved 0|
//! | h_pad   | u32             | only when stretched                     |
//! | w_pad   | u32             | only when stretched                     |
//! | rows    | u32             |                                         |
//! | cols    | u32             |                                         |
//! | nnz     | u64             |                                         |
//! | rowptr  | (rows+1) x u64  |                                         |
//! | colidx  | nnz x u32       |                                         |
//! | value   | nnz x f32       | raw bit patterns                        |
//!
//! Loading re-validates every CSR invariant, so a corrupted file fails
//! with the violated invariant named rather than producing a bad matrix.

use std::fmt;
use std::path::Path;

use sparseconv_core::{CsrMatrix, CsrMode, SparseError};

pub const MAGIC: [u8; 4] = *b"ESCN";
pub const VERSION: u32 = 1;
const FLAG_STRETCHED: u32 = 1;

#[derive(Debug)]
pub enum WeightsError {
    Io(std::io::Error),
    BadMagic { got: [u8; 4] },
    Version { got: u32 },
    UnknownFlags { got: u32 },
    /// The payload ended before `what` could be read.
    Truncated { what: &'static str },
    /// Bytes remain after the value array.
    TrailingBytes { extra: usize },
    /// A field does not fit the file's 32-bit encoding.
    TooLarge { what: &'static str, got: usize },
    Invalid(SparseError),
}

impl fmt::Display for WeightsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightsError::Io(e) => write!(f, "{e}"),
            WeightsError::BadMagic { got } => {
                write!(f, "not a weight file (magic {:02x?}, expected `ESCN`)", got)
            }
            WeightsError::Version { got } => {
                write!(f, "unsupported weight-file version {got} (expected {VERSION})")
            }
            WeightsError::UnknownFlags { got } => {
                write!(f, "unknown flag bits {got:#x} in weight file")
            }
            WeightsError::Truncated { what } => {
                write!(f, "weight file truncated while reading {what}")
            }
            WeightsError::TrailingBytes { extra } => {
                write!(f, "weight file has {extra} unexpected trailing bytes")
            }
            WeightsError::TooLarge { what, got } => {
                write!(f, "{what} = {got} does not fit the file format's 32-bit field")
            }
            WeightsError::Invalid(e) => write!(f, "weight file violates a CSR invariant: {e}"),
        }
    }
}

impl std::error::Error for WeightsError {}

impl From<std::io::Error> for WeightsError {
    fn from(e: std::io::Error) -> Self {
        WeightsError::Io(e)
    }
}

impl From<SparseError> for WeightsError {
    fn from(e: SparseError) -> Self {
        WeightsError::Invalid(e)
    }
}

fn u32_of(what: &'static str, v: usize) -> Result<u32, WeightsError> {
    u32::try_from(v).map_err(|_| WeightsError::TooLarge { what, got: v })
}

/// Serialize a weight matrix to `buf`.
pub fn encode_weights(csr: &CsrMatrix) -> Result<Vec<u8>, WeightsError> {
    let mut buf = Vec::with_capacity(32 + 8 * csr.rowptr.len() + 8 * csr.nnz());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    match csr.mode {
        CsrMode::Unstretched => buf.extend_from_slice(&0u32.to_le_bytes()),
        CsrMode::Stretched { h_pad, w_pad } => {
            buf.extend_from_slice(&FLAG_STRETCHED.to_le_bytes());
            buf.extend_from_slice(&u32_of("h_pad", h_pad)?.to_le_bytes());
            buf.extend_from_slice(&u32_of("w_pad", w_pad)?.to_le_bytes());
        }
    }
    buf.extend_from_slice(&u32_of("rows", csr.rows)?.to_le_bytes());
    buf.extend_from_slice(&u32_of("cols", csr.cols)?.to_le_bytes());
    buf.extend_from_slice(&(csr.nnz() as u64).to_le_bytes());
    for &p in &csr.rowptr {
        buf.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &c in &csr.colidx {
        buf.extend_from_slice(&u32_of("colidx", c)?.to_le_bytes());
    }
    for &v in &csr.value {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    Ok(buf)
}

pub fn write_weights(csr: &CsrMatrix, path: &Path) -> Result<(), WeightsError> {
    let buf = encode_weights(csr)?;
    std::fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WeightsError> {
        if self.buf.len() - self.pos < n {
            return Err(WeightsError::Truncated { what });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, WeightsError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parse a weight matrix from raw bytes, validating all invariants.
pub fn decode_weights(buf: &[u8]) -> Result<CsrMatrix, WeightsError> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(WeightsError::BadMagic { got: magic.try_into().unwrap() });
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(WeightsError::Version { got: version });
    }
    let flags = r.u32("flags")?;
    if flags & !FLAG_STRETCHED != 0 {
        return Err(WeightsError::UnknownFlags { got: flags });
    }
    let mode = if flags & FLAG_STRETCHED != 0 {
        let h_pad = r.u32("h_pad")? as usize;
        let w_pad = r.u32("w_pad")? as usize;
        CsrMode::Stretched { h_pad, w_pad }
    } else {
        CsrMode::Unstretched
    };
    let rows = r.u32("rows")? as usize;
    let cols = r.u32("cols")? as usize;
    let nnz = r.u64("nnz")? as usize;
    let mut rowptr = Vec::with_capacity(rows + 1);
    for _ in 0..rows + 1 {
        rowptr.push(r.u64("rowptr")? as usize);
    }
    let mut colidx = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        colidx.push(r.u32("colidx")? as usize);
    }
    let mut value = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        value.push(f32::from_bits(r.u32("value")?));
    }
    if r.pos != buf.len() {
        return Err(WeightsError::TrailingBytes { extra: buf.len() - r.pos });
    }
    Ok(CsrMatrix::new(rows, cols, rowptr, colidx, value, mode)?)
}

pub fn read_weights(path: &Path) -> Result<CsrMatrix, WeightsError> {
    let buf = std::fs::read(path)?;
    decode_weights(&buf)
}
