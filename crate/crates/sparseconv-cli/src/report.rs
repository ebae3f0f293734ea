//! CSV output for the `bench` and `analyze` subcommands.
//!
//! Column orders are part of the tool's interface and are frozen here as
//! constants; downstream scripts key on them.

/// Header for `bench --csv` output. `sparsity_measured` is the weight
/// matrix's achieved sparsity after pruning, not the requested target.
pub const BENCH_CSV_HEADER: &str = "layer,engine,sparsity_measured,nnz,repeats,time_ms_mean,\
time_ms_std,gflops_effective,traffic_words_est,checksum";

/// One `bench --csv` row.
pub struct BenchRecord {
    pub layer: String,
    pub engine: String,
    pub sparsity_measured: f64,
    pub nnz: usize,
    pub repeats: usize,
    pub time_ms_mean: f64,
    pub time_ms_std: f64,
    pub gflops_effective: f64,
    pub traffic_words_est: u64,
    pub checksum: f64,
}

impl BenchRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.4},{},{},{:.6},{:.6},{:.4},{},{:.6e}",
            self.layer,
            self.engine,
            self.sparsity_measured,
            self.nnz,
            self.repeats,
            self.time_ms_mean,
            self.time_ms_std,
            self.gflops_effective,
            self.traffic_words_est,
            self.checksum,
        )
    }
}

/// Header for `analyze --csv` output: one row per layer x buffer x scheme,
/// with the per-layer access metrics repeated on each row.
pub const ANALYZE_CSV_HEADER: &str = "layer,sparsity,nnz,e,f,read_efficiency,\
read_transactions,read_ideal,write_efficiency,weight_reuse_per_sample,\
lowered_entries_per_sample,direct_footprint_per_sample,ai_direct,ai_lowered,\
scheme,buffer_words,in_words,w_words,out_words,total_words";

pub struct AnalyzeRecord {
    pub layer: String,
    pub sparsity: f64,
    pub nnz: usize,
    pub e: usize,
    pub f: usize,
    pub read_efficiency: f64,
    pub read_transactions: u64,
    pub read_ideal: u64,
    pub write_efficiency: f64,
    pub weight_reuse_per_sample: u64,
    pub lowered_entries_per_sample: u64,
    pub direct_footprint_per_sample: u64,
    pub ai_direct: f64,
    pub ai_lowered: f64,
    pub scheme: String,
    pub buffer_words: String,
    pub in_words: u64,
    pub w_words: u64,
    pub out_words: u64,
    pub total_words: u64,
}

impl AnalyzeRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.4},{},{},{},{:.6},{},{},{:.6},{},{},{},{:.6},{:.6},{},{},{},{},{},{}",
            self.layer,
            self.sparsity,
            self.nnz,
            self.e,
            self.f,
            self.read_efficiency,
            self.read_transactions,
            self.read_ideal,
            self.write_efficiency,
            self.weight_reuse_per_sample,
            self.lowered_entries_per_sample,
            self.direct_footprint_per_sample,
            self.ai_direct,
            self.ai_lowered,
            self.scheme,
            self.buffer_words,
            self.in_words,
            self.w_words,
            self.out_words,
            self.total_words,
        )
    }
}

/// Mean and population standard deviation of a sample, `(0, 0)` when empty
/// and std 0 for a single observation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
    (mean, var.sqrt())
}
