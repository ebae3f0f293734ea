//! `sparseconv` — sparse convolution engines with an analytical memory-access
//! model.
//!
//! Subcommands: `verify` (engine agreement against the dense reference),
//! `bench` (wall-clock sweeps with CSV output), `analyze` (coalescing,
//! reuse, intensity, and dataflow traffic predictions), `prune` (weight
//! generation/pruning and weight-file serialization).
//!
//! Exit codes: 0 success, 2 usage or configuration errors, 3 verification
//! failures, 4 file I/O or weight-file errors.

mod commands;
mod config;
mod report;
mod weights_io;

use clap::{Parser, Subcommand};

use commands::{analyze, bench, prune, verify, CliError};

#[derive(Parser)]
#[command(
    name = "sparseconv",
    version,
    about = "Sparse CNN convolution engines with an analytical GPU memory-access model"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check every engine against the dense direct reference.
    Verify(verify::VerifyArgs),
    /// Time engines over the layer set; write CSV records.
    Bench(bench::BenchArgs),
    /// Predict coalescing, reuse, intensity, and dataflow traffic.
    Analyze(analyze::AnalyzeArgs),
    /// Generate or load weights, prune by magnitude, write a weight file.
    Prune(prune::PruneArgs),
}

fn main() {
    let cli = Cli::parse();
    let result: Result<(), CliError> = match &cli.cmd {
        Cmd::Verify(args) => verify::run(args),
        Cmd::Bench(args) => bench::run(args),
        Cmd::Analyze(args) => analyze::run(args),
        Cmd::Prune(args) => prune::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
