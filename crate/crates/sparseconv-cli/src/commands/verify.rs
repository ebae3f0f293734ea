//! `verify`: run every requested engine against the dense direct reference
//! and report elementwise agreement.

use std::path::PathBuf;

use clap::Args;
use sparseconv_core::{compare_outputs, EngineKind, DEFAULT_ATOL, DEFAULT_RTOL};

use super::{
    load_config, prepare, resolve_engine, run_engine, sparsity_sweep, CliError, LayerData,
};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Layer config file (omit for the built-in default set).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Engines to check, comma separated (default: all four).
    #[arg(long = "engine", value_delimiter = ',', value_parser = super::engine_arg)]
    pub engines: Vec<EngineKind>,
    /// Worker threads for the direct sparse engine.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Randomized trials per layer; trial t shifts the seed by t.
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    /// Override every layer's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override layer sparsities with this sweep, comma separated.
    #[arg(long = "sparsity", value_delimiter = ',')]
    pub sparsity: Option<Vec<f64>>,
    /// Corrupt one stretched column index per layer to demonstrate the
    /// failure path.
    #[arg(long, default_value_t = false)]
    pub inject_fault: bool,
}

/// Flip one stored weight's stretched input offset. Decrementing keeps the
/// offset in bounds, so the engine runs to completion and produces a wrong
/// (detectable) output instead of crashing. The largest-magnitude eligible
/// weight is chosen so the perturbation cannot hide inside the comparison
/// tolerance.
fn inject_fault(data: &mut LayerData) -> bool {
    let victim = data
        .stretched
        .colidx
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0)
        .max_by(|&(a, _), &(b, _)| {
            data.stretched.value[a].abs().total_cmp(&data.stretched.value[b].abs())
        });
    if let Some((j, _)) = victim {
        data.stretched.colidx[j] -= 1;
        return true;
    }
    false
}

pub fn run(args: &VerifyArgs) -> Result<(), CliError> {
    let layers = load_config(args.config.as_deref())?;
    let engines: Vec<EngineKind> = if args.engines.is_empty() {
        EngineKind::ALL_CONCRETE.to_vec()
    } else {
        args.engines.clone()
    };

    let mut failed = 0usize;
    let mut total = 0usize;
    println!(
        "{:<14} {:>8} {:>6} {:<14} {:>12} {:>10}  result",
        "layer", "sparsity", "trial", "engine", "max|err|", "err/tol"
    );
    for cfg in &layers {
        for &sp in &sparsity_sweep(args.sparsity.as_deref(), cfg)? {
            for trial in 0..args.trials {
                let seed = args.seed.unwrap_or(cfg.seed).wrapping_add(trial);
                let mut data = prepare(cfg, sp, seed);
                if args.inject_fault && !inject_fault(&mut data) {
                    println!("{}: no stored weight to corrupt, skipping", cfg.name);
                    continue;
                }
                let oracle = run_engine(EngineKind::DenseDirect, &data, 1)?;
                for &kind in &engines {
                    let resolved = resolve_engine(kind, &data);
                    let outcome = run_engine(resolved, &data, args.threads)?;
                    let stats = compare_outputs(
                        &outcome.output,
                        &oracle.output,
                        DEFAULT_RTOL,
                        DEFAULT_ATOL,
                    );
                    total += 1;
                    let label = if kind == EngineKind::Auto {
                        format!("auto:{resolved}")
                    } else {
                        resolved.to_string()
                    };
                    let verdict = if stats.within {
                        "pass".to_string()
                    } else {
                        failed += 1;
                        let at = outcome.output.unflatten(stats.argmax);
                        format!("FAIL at {at:?}")
                    };
                    println!(
                        "{:<14} {:>8.2} {:>6} {:<14} {:>12.3e} {:>10.3} {}",
                        cfg.name, sp, trial, label, stats.max_abs, stats.max_ratio, verdict
                    );
                }
            }
        }
    }
    println!("verify: {}/{} checks passed", total - failed, total);
    if failed > 0 {
        return Err(CliError::Verify { failed, total });
    }
    Ok(())
}
