//! Layer configuration text format.
//!
//! A config file is a sequence of layer records:
//!
//! ```text
//! # comment — everything after `#` is ignored
//! layer conv2-like
//! n = 2
//! m = 32
//! c = 12
//! h = 13
//! w = 13
//! r = 5
//! s = 5
//! pad = 2
//! sparsity = 0.85
//! ```
//!
//! A record starts at a `layer <name>` line and collects `key = value`
//! lines until the next record. Valid keys are `n, m, c, h, w, r, s,
//! stride, pad, sparsity, seed`; `m, c, h, w, r, s` are required, the rest
//! default to `n = 1`, `stride = 1`, `pad = 0`, `sparsity = 0`,
//! `seed = 42`. Blank lines are insignificant. Layer names are
//! `[A-Za-z0-9_.-]+` and must be unique. Every error carries the line it
//! was found on.

use std::collections::HashSet;
use std::fmt;

use sparseconv_core::{ConvShape, ShapeError};

/// One layer to generate, verify, or benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerConfig {
    pub name: String,
    pub shape: ConvShape,
    /// Target weight sparsity the driver prunes to.
    pub sparsity: f64,
    /// Seed for deterministic input/weight generation.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line number.
    pub line: usize,
    pub kind: ConfigErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigErrorKind {
    MissingLayerName,
    BadLayerName { name: String },
    DuplicateLayer { name: String },
    KeyOutsideLayer,
    MissingEquals,
    UnknownKey { key: String },
    DuplicateKey { key: String },
    InvalidValue { key: String, value: String, reason: &'static str },
    MissingKeys { layer: String, keys: Vec<&'static str> },
    BadShape { layer: String, error: ShapeError },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            ConfigErrorKind::MissingLayerName => write!(f, "`layer` needs a name"),
            ConfigErrorKind::BadLayerName { name } => {
                write!(f, "layer name `{name}` is not [A-Za-z0-9_.-]+")
            }
            ConfigErrorKind::DuplicateLayer { name } => {
                write!(f, "duplicate layer name `{name}`")
            }
            ConfigErrorKind::KeyOutsideLayer => {
                write!(f, "key assignment before any `layer` line")
            }
            ConfigErrorKind::MissingEquals => write!(f, "expected `key = value`"),
            ConfigErrorKind::UnknownKey { key } => write!(f, "unknown key `{key}`"),
            ConfigErrorKind::DuplicateKey { key } => {
                write!(f, "key `{key}` set twice in one layer")
            }
            ConfigErrorKind::InvalidValue { key, value, reason } => {
                write!(f, "invalid value `{value}` for `{key}`: {reason}")
            }
            ConfigErrorKind::MissingKeys { layer, keys } => {
                write!(f, "layer `{layer}` is missing required keys: {}", keys.join(", "))
            }
            ConfigErrorKind::BadShape { layer, error } => {
                write!(f, "layer `{layer}` has an invalid shape: {error}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug)]
struct Builder {
    name: String,
    header_line: usize,
    dims: [Option<usize>; 9], // n m c h w r s stride pad
    sparsity: Option<f64>,
    seed: Option<u64>,
}

const DIM_KEYS: [&str; 9] = ["n", "m", "c", "h", "w", "r", "s", "stride", "pad"];

impl Builder {
    fn new(name: String, header_line: usize) -> Self {
        Builder { name, header_line, dims: [None; 9], sparsity: None, seed: None }
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let err = |kind| ConfigError { line, kind };
        let invalid = |key: &str, reason| {
            ConfigError {
                line,
                kind: ConfigErrorKind::InvalidValue {
                    key: key.to_string(),
                    value: value.to_string(),
                    reason,
                },
            }
        };
        if let Some(i) = DIM_KEYS.iter().position(|&k| k == key) {
            if self.dims[i].is_some() {
                return Err(err(ConfigErrorKind::DuplicateKey { key: key.to_string() }));
            }
            let v: usize =
                value.parse().map_err(|_| invalid(key, "not a non-negative integer"))?;
            if v == 0 && key != "pad" {
                return Err(invalid(key, "must be >= 1"));
            }
            self.dims[i] = Some(v);
            return Ok(());
        }
        match key {
            "sparsity" => {
                if self.sparsity.is_some() {
                    return Err(err(ConfigErrorKind::DuplicateKey { key: key.to_string() }));
                }
                let v: f64 = value.parse().map_err(|_| invalid(key, "not a number"))?;
                if !(0.0..1.0).contains(&v) {
                    return Err(invalid(key, "must be in [0, 1)"));
                }
                self.sparsity = Some(v);
                Ok(())
            }
            "seed" => {
                if self.seed.is_some() {
                    return Err(err(ConfigErrorKind::DuplicateKey { key: key.to_string() }));
                }
                let v: u64 =
                    value.parse().map_err(|_| invalid(key, "not a 64-bit unsigned integer"))?;
                self.seed = Some(v);
                Ok(())
            }
            _ => Err(err(ConfigErrorKind::UnknownKey { key: key.to_string() })),
        }
    }

    fn finish(self) -> Result<LayerConfig, ConfigError> {
        let missing: Vec<&'static str> = [1usize, 2, 3, 4, 5, 6] // m c h w r s
            .iter()
            .filter(|&&i| self.dims[i].is_none())
            .map(|&i| DIM_KEYS[i])
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError {
                line: self.header_line,
                kind: ConfigErrorKind::MissingKeys { layer: self.name, keys: missing },
            });
        }
        let d = |i: usize, default: usize| self.dims[i].unwrap_or(default);
        let shape = ConvShape::new(
            d(0, 1),
            d(1, 0),
            d(2, 0),
            d(3, 0),
            d(4, 0),
            d(5, 0),
            d(6, 0),
            d(7, 1),
            d(8, 0),
        )
        .map_err(|error| ConfigError {
            line: self.header_line,
            kind: ConfigErrorKind::BadShape { layer: self.name.clone(), error },
        })?;
        Ok(LayerConfig {
            name: self.name,
            shape,
            sparsity: self.sparsity.unwrap_or(0.0),
            seed: self.seed.unwrap_or(42),
        })
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Parse a config file into layers, in file order.
pub fn parse_config(text: &str) -> Result<Vec<LayerConfig>, ConfigError> {
    let mut layers = Vec::new();
    let mut names = HashSet::new();
    let mut current: Option<Builder> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("layer") {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                let name = rest.trim();
                if name.is_empty() {
                    return Err(ConfigError {
                        line: line_no,
                        kind: ConfigErrorKind::MissingLayerName,
                    });
                }
                if !valid_name(name) {
                    return Err(ConfigError {
                        line: line_no,
                        kind: ConfigErrorKind::BadLayerName { name: name.to_string() },
                    });
                }
                if !names.insert(name.to_string()) {
                    return Err(ConfigError {
                        line: line_no,
                        kind: ConfigErrorKind::DuplicateLayer { name: name.to_string() },
                    });
                }
                if let Some(done) = current.take() {
                    layers.push(done.finish()?);
                }
                current = Some(Builder::new(name.to_string(), line_no));
                continue;
            }
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError { line: line_no, kind: ConfigErrorKind::MissingEquals });
        };
        let Some(builder) = current.as_mut() else {
            return Err(ConfigError { line: line_no, kind: ConfigErrorKind::KeyOutsideLayer });
        };
        builder.set(key.trim(), value.trim(), line_no)?;
    }
    if let Some(done) = current.take() {
        layers.push(done.finish()?);
    }
    Ok(layers)
}
