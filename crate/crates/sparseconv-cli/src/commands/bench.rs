//! `bench`: wall-clock timing sweeps over layers x engines with CSV output.

use std::path::PathBuf;

use clap::Args;
use sparseconv_core::{AccessPath, EngineKind};

use super::{
    checksum, load_config, prepare, resolve_engine, run_engine, sparsity_sweep, CliError,
    LayerData,
};
use crate::report::{mean_std, BenchRecord, BENCH_CSV_HEADER};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Layer config file (omit for the built-in default set).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Engines to time, comma separated (default: all four).
    #[arg(long = "engine", value_delimiter = ',', value_parser = super::engine_arg)]
    pub engines: Vec<EngineKind>,
    /// Worker threads for the direct sparse engine.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Timed runs per layer x engine.
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Untimed warmup runs before the clock starts.
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
    /// Write records to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Override every layer's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override layer sparsities with this sweep, comma separated.
    #[arg(long = "sparsity", value_delimiter = ',')]
    pub sparsity: Option<Vec<f64>>,
}

/// Modeled off-chip words for one engine run: the intensity-model word
/// count for the engine's access path, with the full kernel count standing
/// in for nnz on the dense engines (they stream every weight).
fn traffic_words_est(kind: EngineKind, data: &LayerData) -> u64 {
    let shape = &data.cfg.shape;
    let nnz_eff = match kind {
        EngineKind::DenseDirect | EngineKind::LoweredDense => shape.m() * shape.kernel_cols(),
        _ => data.csr.nnz(),
    };
    let path = match kind {
        EngineKind::DenseDirect | EngineKind::SparseDirect => AccessPath::Direct,
        _ => AccessPath::Lowered,
    };
    let stats = sparseconv_core::reuse_stats(shape, nnz_eff);
    match path {
        AccessPath::Direct => stats.words_direct.total(),
        AccessPath::Lowered => stats.words_lowered.total(),
    }
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let layers = load_config(args.config.as_deref())?;
    let engines: Vec<EngineKind> = if args.engines.is_empty() {
        EngineKind::ALL_CONCRETE.to_vec()
    } else {
        args.engines.clone()
    };

    let mut records: Vec<BenchRecord> = Vec::new();
    for cfg in &layers {
        for &sp in &sparsity_sweep(args.sparsity.as_deref(), cfg)? {
            let data = prepare(cfg, sp, args.seed.unwrap_or(cfg.seed));
            println!(
                "layer {} (target sparsity {:.2}, measured {:.4}, nnz {})",
                cfg.name,
                sp,
                data.csr.sparsity(),
                data.csr.nnz()
            );
            println!(
                "  {:<20} {:>12} {:>10} {:>10} {:>12}",
                "engine", "mean ms", "std ms", "GFLOP/s", "vs lowered"
            );
            let mut baseline_ms: Option<f64> = None;
            let mut layer_recs: Vec<(EngineKind, BenchRecord)> = Vec::new();
            for &kind in &engines {
                let resolved = resolve_engine(kind, &data);
                for _ in 0..args.warmup {
                    run_engine(resolved, &data, args.threads)?;
                }
                let mut times_ms = Vec::with_capacity(args.repeats);
                let mut last = None;
                for _ in 0..args.repeats {
                    let outcome = run_engine(resolved, &data, args.threads)?;
                    times_ms.push(outcome.wall.as_secs_f64() * 1e3);
                    last = Some(outcome);
                }
                let last = last.expect("repeats >= 1");
                let (mean, std) = mean_std(&times_ms);
                if resolved == EngineKind::LoweredDense {
                    baseline_ms = Some(mean);
                }
                let label = if kind == EngineKind::Auto {
                    format!("auto:{resolved}")
                } else {
                    resolved.to_string()
                };
                layer_recs.push((
                    resolved,
                    BenchRecord {
                        layer: cfg.name.clone(),
                        engine: label,
                        sparsity_measured: data.csr.sparsity(),
                        nnz: data.csr.nnz(),
                        repeats: args.repeats,
                        time_ms_mean: mean,
                        time_ms_std: std,
                        gflops_effective: if mean > 0.0 {
                            last.flops as f64 / (mean * 1e6)
                        } else {
                            0.0
                        },
                        traffic_words_est: traffic_words_est(resolved, &data),
                        checksum: checksum(&last.output),
                    },
                ));
            }
            // Speedup of each engine over the lowered dense baseline, when
            // that baseline was part of the sweep.
            for (_, rec) in &layer_recs {
                let speedup = match baseline_ms {
                    Some(base) if rec.time_ms_mean > 0.0 => {
                        format!("{:.2}x", base / rec.time_ms_mean)
                    }
                    _ => "-".to_string(),
                };
                println!(
                    "  {:<20} {:>12.4} {:>10.4} {:>10.3} {:>12}",
                    rec.engine, rec.time_ms_mean, rec.time_ms_std, rec.gflops_effective, speedup
                );
            }
            records.extend(layer_recs.into_iter().map(|(_, r)| r));
        }
    }

    if let Some(path) = &args.csv {
        let mut text = String::from(BENCH_CSV_HEADER);
        text.push('\n');
        for r in &records {
            text.push_str(&r.csv_line());
            text.push('\n');
        }
        std::fs::write(path, text)
            .map_err(|e| CliError::Io { path: path.clone(), source: e })?;
        println!("wrote {} records to {}", records.len(), path.display());
    }
    Ok(())
}
