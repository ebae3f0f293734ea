//! `prune`: produce a weight file — generate or load dense weights, zero
//! the smallest magnitudes to a target sparsity, convert to CSR,
//! optionally stretch, and serialize.

use std::path::PathBuf;

use clap::Args;
use sparseconv_core::{
    csr_to_dense, dense_to_csr, prune_by_magnitude, stretch_weights, CsrMode, Tensor4D,
};

use super::{load_config, CliError, WEIGHT_SEED_SALT};
use crate::config::LayerConfig;
use crate::weights_io::{read_weights, write_weights, WeightsError};

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Layer config file supplying the generated shape (omit for the
    /// built-in default set).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Which config layer to generate weights for (or to stretch against).
    #[arg(long)]
    pub layer: Option<String>,
    /// Prune an existing unstretched weight file instead of generating.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Override the layer's seed for generated weights.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target sparsity in [0, 1) (defaults to the layer's configured
    /// value; required with --input).
    #[arg(long)]
    pub sparsity: Option<f64>,
    /// Rewrite column indices into padded-input offsets for the layer's
    /// shape before writing.
    #[arg(long, default_value_t = false)]
    pub stretch: bool,
    /// Output weight file.
    #[arg(long)]
    pub out: PathBuf,
}

fn find_layer<'a>(layers: &'a [LayerConfig], name: &str) -> Result<&'a LayerConfig, CliError> {
    layers.iter().find(|l| l.name == name).ok_or_else(|| {
        let names: Vec<&str> = layers.iter().map(|l| l.name.as_str()).collect();
        CliError::Usage(format!(
            "layer `{name}` not in config (available: {})",
            names.join(", ")
        ))
    })
}

pub fn run(args: &PruneArgs) -> Result<(), CliError> {
    // The config layer is needed to generate weights and to stretch; load
    // it lazily only when one of those applies.
    let layer = match (&args.input, &args.layer, args.stretch) {
        (Some(_), None, false) => None,
        (_, Some(name), _) => {
            let layers = load_config(args.config.as_deref())?;
            Some(find_layer(&layers, name)?.clone())
        }
        (Some(_), None, true) => {
            return Err(CliError::Usage(
                "--stretch needs --layer to supply the target shape".into(),
            ));
        }
        (None, None, _) => {
            return Err(CliError::Usage(
                "nothing to prune: give --layer to generate weights or --input to load them"
                    .into(),
            ));
        }
    };

    // Dense starting point: either the loaded matrix densified, or a fresh
    // random filter bank for the layer.
    let (dense, source) = match &args.input {
        Some(path) => {
            let csr = read_weights(path)
                .map_err(|e| CliError::Weights { path: path.clone(), source: e })?;
            if csr.mode != CsrMode::Unstretched {
                return Err(CliError::Usage(format!(
                    "{}: stretched weight files cannot be pruned; supply the kernel-space matrix",
                    path.display()
                )));
            }
            let dense = Tensor4D::from_vec([csr.rows, csr.cols, 1, 1], csr_to_dense(&csr))
                .expect("densified CSR always matches its own dims");
            (dense, format!("{} ({}x{})", path.display(), csr.rows, csr.cols))
        }
        None => {
            let layer = layer.as_ref().expect("generation requires --layer");
            let seed = args.seed.unwrap_or(layer.seed) ^ WEIGHT_SEED_SALT;
            let dense = Tensor4D::random(layer.shape.weight_dims(), seed, 1.0);
            (dense, format!("generated for layer {} (seed {})", layer.name, seed))
        }
    };

    let target = match (args.sparsity, &args.input, &layer) {
        (Some(t), _, _) => t,
        (None, None, Some(layer)) => layer.sparsity,
        (None, Some(_), _) => {
            return Err(CliError::Usage("--sparsity is required with --input".into()));
        }
        (None, None, None) => unreachable!("generation requires --layer"),
    };
    if !(0.0..1.0).contains(&target) {
        return Err(CliError::Usage(format!("--sparsity value {target} outside [0, 1)")));
    }

    let pruned = prune_by_magnitude(&dense, target);
    let mut csr = dense_to_csr(&pruned);
    if args.stretch {
        let layer = layer.as_ref().expect("checked above");
        if csr.rows != layer.shape.m() {
            return Err(CliError::Usage(format!(
                "cannot stretch for layer {}: matrix has {} rows, shape expects m = {}",
                layer.name,
                csr.rows,
                layer.shape.m()
            )));
        }
        csr = stretch_weights(&csr, &layer.shape).map_err(|e| {
            CliError::Usage(format!(
                "cannot stretch for layer {}: {e}",
                layer.name
            ))
        })?;
    }

    write_weights(&csr, &args.out)
        .map_err(|e| CliError::Weights { path: args.out.clone(), source: e })?;
    let back = read_weights(&args.out)
        .map_err(|e| CliError::Weights { path: args.out.clone(), source: e })?;
    if back != csr {
        return Err(CliError::Weights {
            path: args.out.clone(),
            source: WeightsError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "round-trip verification failed",
            )),
        });
    }

    let dense_bytes = 4 * csr.rows * csr.kernel_cols();
    println!("source: {source}");
    println!("target sparsity {target}, achieved {:.6} ({} of {} weights kept)",
        csr.sparsity(),
        csr.nnz(),
        csr.rows * csr.kernel_cols(),
    );
    println!(
        "footprint (2*nnz + rows + 1) * 4 = {} bytes vs {} dense bytes ({:.1}%)",
        csr.footprint_bytes(),
        dense_bytes,
        100.0 * csr.footprint_bytes() as f64 / dense_bytes as f64
    );
    println!(
        "wrote {} ({}, {} rows x {} cols, round trip verified bitwise)",
        args.out.display(),
        match csr.mode {
            CsrMode::Unstretched => "kernel-space".to_string(),
            CsrMode::Stretched { h_pad, w_pad } =>
                format!("stretched for {h_pad}x{w_pad} padded input"),
        },
        csr.rows,
        csr.cols
    );
    Ok(())
}
