//! Shared plumbing for the four subcommands: error-to-exit-code mapping,
//! deterministic layer-data generation, and the uniform engine driver.

pub mod analyze;
pub mod bench;
pub mod prune;
pub mod verify;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use sparseconv_core::{
    conv_dense_direct, conv_lowered_dense, conv_lowered_sparse, conv_sparse_direct,
    conv_sparse_direct_parallel, dense_to_csr, pad_input, prune_by_magnitude, select_engine,
    stretch_weights, ConvResult, CsrMatrix, EngineError, EngineKind, Tensor4D,
};

use crate::config::{parse_config, ConfigError, LayerConfig};
use crate::weights_io::WeightsError;

/// Everything the driver can fail with, mapped onto distinct process exit
/// codes: 2 for configuration/usage problems (clap uses the same code for
/// flag errors), 3 for verification failures, 4 for file I/O and weight-file
/// problems.
#[derive(Debug)]
pub enum CliError {
    Config { path: String, source: ConfigError },
    Usage(String),
    Verify { failed: usize, total: usize },
    Io { path: PathBuf, source: std::io::Error },
    Weights { path: PathBuf, source: WeightsError },
    Engine { layer: String, engine: EngineKind, source: EngineError },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Verify { .. } => 3,
            CliError::Io { .. } | CliError::Weights { .. } => 4,
            // An engine rejecting driver-built operands is a driver bug;
            // surface it like a usage error rather than a verify failure.
            CliError::Engine { .. } => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { path, source } => write!(f, "{path}: {source}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Verify { failed, total } => {
                write!(f, "verification failed: {failed} of {total} checks out of tolerance")
            }
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Weights { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Engine { layer, engine, source } => {
                write!(f, "layer {layer}, engine {engine}: {source}")
            }
        }
    }
}

impl std::error::Error for CliError {}

/// Salt XORed into a layer's seed to derive its weight stream, so inputs
/// and weights never share a generator state (ASCII "WEIGHT01").
pub const WEIGHT_SEED_SALT: u64 = 0x5745_4947_4854_3031;

/// Configuration shipped inside the binary and used when --config is
/// absent.
pub const DEFAULT_CONFIG: &str = include_str!("../../configs/default.cfg");

/// Load and parse a config file, or fall back to the embedded default.
pub fn load_config(path: Option<&Path>) -> Result<Vec<LayerConfig>, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io { path: p.to_path_buf(), source: e })?;
            parse_config(&text)
                .map_err(|e| CliError::Config { path: p.display().to_string(), source: e })
        }
        None => parse_config(DEFAULT_CONFIG)
            .map_err(|e| CliError::Config { path: "<built-in>".into(), source: e }),
    }
}

/// One layer's fully prepared operands: deterministic input, pruned dense
/// weights, and the CSR matrix in both index spaces.
pub struct LayerData<'a> {
    pub cfg: &'a LayerConfig,
    pub input: Tensor4D,
    /// Dense `[m, c, r, s]` weights after pruning.
    pub dense_weights: Tensor4D,
    /// Kernel-space CSR of `dense_weights`.
    pub csr: CsrMatrix,
    /// Padded-input-space CSR for the direct sparse engine.
    pub stretched: CsrMatrix,
}

/// Generate a layer's operands. Inputs draw from `seed`, raw weights from
/// `seed ^ WEIGHT_SEED_SALT`; both streams are uniform in [-1, 1). The
/// weights are magnitude-pruned to `sparsity` before conversion.
pub fn prepare(cfg: &LayerConfig, sparsity: f64, seed: u64) -> LayerData<'_> {
    let shape = &cfg.shape;
    let input = Tensor4D::random(shape.input_dims(), seed, 1.0);
    let raw = Tensor4D::random(shape.weight_dims(), seed ^ WEIGHT_SEED_SALT, 1.0);
    let dense_weights = prune_by_magnitude(&raw, sparsity);
    let csr = dense_to_csr(&dense_weights);
    let stretched = stretch_weights(&csr, shape)
        .expect("kernel-space CSR built from the same shape always stretches");
    LayerData { cfg, input, dense_weights, csr, stretched }
}

/// Resolve `auto` to a concrete engine for this layer's weights.
pub fn resolve_engine(kind: EngineKind, data: &LayerData) -> EngineKind {
    match kind {
        EngineKind::Auto => select_engine(&data.cfg.shape, data.csr.sparsity()),
        k => k,
    }
}

/// One engine invocation's result with a uniform wall-clock measurement.
pub struct RunOutcome {
    pub output: Tensor4D,
    pub flops: u64,
    pub wall: Duration,
}

/// Run one engine on prepared layer data.
///
/// Every engine is timed from the same raw, unpadded input so the clock
/// covers whatever data staging the path needs at execution time: the
/// dense direct and lowered engines pad or zero-fill internally, and the
/// direct sparse engine's padded copy is made here inside the timed window
/// (skipped when pad = 0). Weight stretching stays outside the clock; it
/// is a one-time offline transform.
pub fn run_engine(
    kind: EngineKind,
    data: &LayerData,
    threads: usize,
) -> Result<RunOutcome, CliError> {
    let shape = &data.cfg.shape;
    let run = || -> Result<ConvResult, EngineError> {
        match resolve_engine(kind, data) {
            EngineKind::DenseDirect => conv_dense_direct(&data.input, &data.dense_weights, shape),
            EngineKind::LoweredDense => {
                conv_lowered_dense(&data.input, &data.dense_weights, shape)
            }
            EngineKind::LoweredSparse => conv_lowered_sparse(&data.input, &data.csr, shape),
            EngineKind::SparseDirect => {
                let sparse = |padded: &Tensor4D| {
                    if threads <= 1 {
                        conv_sparse_direct(padded, &data.stretched, shape)
                    } else {
                        conv_sparse_direct_parallel(padded, &data.stretched, shape, threads)
                    }
                };
                if shape.pad() == 0 {
                    sparse(&data.input)
                } else {
                    sparse(&pad_input(&data.input, shape.pad()))
                }
            }
            EngineKind::Auto => unreachable!("resolve_engine returns a concrete kind"),
        }
    };
    let start = Instant::now();
    let result = run().map_err(|e| CliError::Engine {
        layer: data.cfg.name.clone(),
        engine: kind,
        source: e,
    })?;
    let wall = start.elapsed();
    Ok(RunOutcome { output: result.output, flops: result.flops, wall })
}

/// Sum of all output elements in 64-bit, the cross-engine comparison
/// scalar reported in bench CSV.
pub fn checksum(t: &Tensor4D) -> f64 {
    t.data().iter().map(|&v| v as f64).sum()
}

/// Resolve the sparsity sweep for a layer: the --sparsity list if given
/// (validated to [0, 1)), else the layer's own configured target.
pub fn sparsity_sweep(
    flag: Option<&[f64]>,
    cfg: &LayerConfig,
) -> Result<Vec<f64>, CliError> {
    match flag {
        Some(list) => {
            for &s in list {
                if !(0.0..1.0).contains(&s) {
                    return Err(CliError::Usage(format!(
                        "--sparsity value {s} outside [0, 1)"
                    )));
                }
            }
            Ok(list.to_vec())
        }
        None => Ok(vec![cfg.sparsity]),
    }
}

/// clap value parser for --engine.
pub fn engine_arg(s: &str) -> Result<EngineKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

/// clap value parser for --buffer: a word count or `inf` for unbounded.
pub fn buffer_arg(s: &str) -> Result<u64, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(u64::MAX);
    }
    match s.parse::<u64>() {
        Ok(0) => Err("buffer size must be positive (or `inf`)".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("`{s}` is not a buffer size (word count or `inf`)")),
    }
}

/// Render a buffer size for reports, `inf` for the unbounded sentinel.
pub fn buffer_label(words: u64) -> String {
    if words == u64::MAX {
        "inf".into()
    } else {
        words.to_string()
    }
}
