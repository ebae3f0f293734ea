//! `analyze`: static memory-system predictions per layer — warp coalescing,
//! reuse, arithmetic intensity, and stationary-dataflow traffic.

use std::path::PathBuf;

use clap::Args;
use sparseconv_core::{
    arithmetic_intensity, dataflow_traffic, reuse_stats, simulate_read_coalescing,
    simulate_write_coalescing, AccessPath, DataflowScheme, WarpModel,
};

use super::{buffer_label, load_config, prepare, sparsity_sweep, CliError};
use crate::report::{AnalyzeRecord, ANALYZE_CSV_HEADER};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Layer config file (omit for the built-in default set).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override every layer's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override layer sparsities with this sweep, comma separated.
    #[arg(long = "sparsity", value_delimiter = ',')]
    pub sparsity: Option<Vec<f64>>,
    /// SIMD lanes issuing one memory request together.
    #[arg(long, default_value_t = 32)]
    pub lanes: usize,
    /// Memory transaction granularity in bytes.
    #[arg(long, default_value_t = 32)]
    pub txn_bytes: usize,
    /// Element size in bytes.
    #[arg(long, default_value_t = 4)]
    pub elem_bytes: usize,
    /// Fast-buffer capacities in words for the dataflow model; `inf` for
    /// unbounded.
    #[arg(
        long = "buffer",
        value_delimiter = ',',
        value_parser = super::buffer_arg,
        default_value = "1024,16384,inf"
    )]
    pub buffers: Vec<u64>,
    /// Write records to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn run(args: &AnalyzeArgs) -> Result<(), CliError> {
    let layers = load_config(args.config.as_deref())?;
    let model = WarpModel::new(args.lanes, args.txn_bytes, args.elem_bytes)
        .map_err(|e| CliError::Usage(format!("invalid access model: {e}")))?;

    let mut records: Vec<AnalyzeRecord> = Vec::new();
    for cfg in &layers {
        for &sp in &sparsity_sweep(args.sparsity.as_deref(), cfg)? {
            let data = prepare(cfg, sp, args.seed.unwrap_or(cfg.seed));
            let shape = &cfg.shape;
            let nnz = data.csr.nnz();
            let (e, f) = shape.output_dims();

            let read = simulate_read_coalescing(&data.stretched, shape, &model)
                .map_err(|e| CliError::Usage(format!("layer {}: {e}", cfg.name)))?;
            let write = simulate_write_coalescing(shape, &model);
            let reuse = reuse_stats(shape, nnz);
            let ai_direct = arithmetic_intensity(shape, nnz, AccessPath::Direct);
            let ai_lowered = arithmetic_intensity(shape, nnz, AccessPath::Lowered);

            println!(
                "layer {} (sparsity {:.4}, nnz {}, output {}x{})",
                cfg.name,
                data.csr.sparsity(),
                nnz,
                e,
                f
            );
            println!(
                "  input reads : {} warp reads, {} transactions ({} ideal), efficiency {:.3}",
                read.warp_reads,
                read.transactions,
                read.ideal_transactions,
                read.efficiency()
            );
            println!(
                "  output write: {} transactions ({} ideal), efficiency {:.3}",
                write.transactions,
                write.ideal_transactions,
                write.efficiency()
            );
            println!(
                "  reuse       : each weight feeds {} outputs/sample ({} per batch)",
                reuse.weight_reuse_per_sample, reuse.weight_reuse_batch
            );
            println!(
                "  footprint   : lowered materializes {} values/sample vs {} padded inputs",
                reuse.lowered_entries_per_sample, reuse.direct_footprint_per_sample
            );
            println!(
                "  intensity   : direct {:.4} FLOP/byte vs lowered {:.4} FLOP/byte",
                ai_direct, ai_lowered
            );
            println!(
                "  traffic     : {:<10} {:<18} {:>14} {:>14} {:>14} {:>14}",
                "buffer", "scheme", "in words", "w words", "out words", "total"
            );
            for &buf in &args.buffers {
                for scheme in DataflowScheme::ALL {
                    let t = dataflow_traffic(shape, nnz, scheme, buf)
                        .map_err(|e| CliError::Usage(format!("layer {}: {e}", cfg.name)))?;
                    println!(
                        "                {:<10} {:<18} {:>14} {:>14} {:>14} {:>14}",
                        buffer_label(buf),
                        scheme.name(),
                        t.in_words,
                        t.w_words,
                        t.out_words,
                        t.total_words
                    );
                    records.push(AnalyzeRecord {
                        layer: cfg.name.clone(),
                        sparsity: data.csr.sparsity(),
                        nnz,
                        e,
                        f,
                        read_efficiency: read.efficiency(),
                        read_transactions: read.transactions,
                        read_ideal: read.ideal_transactions,
                        write_efficiency: write.efficiency(),
                        weight_reuse_per_sample: reuse.weight_reuse_per_sample,
                        lowered_entries_per_sample: reuse.lowered_entries_per_sample,
                        direct_footprint_per_sample: reuse.direct_footprint_per_sample,
                        ai_direct,
                        ai_lowered,
                        scheme: scheme.name().to_string(),
                        buffer_words: buffer_label(buf),
                        in_words: t.in_words,
                        w_words: t.w_words,
                        out_words: t.out_words,
                        total_words: t.total_words,
                    });
                }
            }
        }
    }

    if let Some(path) = &args.csv {
        let mut text = String::from(ANALYZE_CSV_HEADER);
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
