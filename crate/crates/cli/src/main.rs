//! `gcn-ntk`: compute GCN neural tangent kernels, classify nodes with them
//! and run the oracle battery.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcn_ntk::{Activation, NtkForm, OutputHead, Variant};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "gcn-ntk",
    version,
    about = "Neural tangent kernels of graph convolutional networks"
)]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the kernel of one architecture and write it to disk.
    ComputeNtk(ComputeArgs),
    /// Kernel regression over the train/test split using a kernel file.
    Predict(PredictArgs),
    /// Kernel regression accuracy at several depths.
    Sweep(SweepArgs),
    /// Pairwise eigenspace alignment of kernels at several depths.
    Align(AlignArgs),
    /// Run the oracle battery and print a pass/fail table.
    Verify(VerifyArgs),
    /// Train a finite-width network with full-batch gradient descent.
    Train(TrainArgs),
}

#[derive(Debug, Args, Serialize)]
struct GraphArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// L2-normalize feature rows at load.
    #[arg(long)]
    normalize_features: bool,
}

#[derive(Debug, Args, Serialize)]
struct LabelArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    grouping: PathBuf,
    #[arg(long)]
    split: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ArchArgs {
    /// vanilla, skip-pc or skip-alpha.
    #[arg(long, default_value = "vanilla")]
    variant: Variant,
    /// linear or relu.
    #[arg(long, default_value = "relu")]
    activation: Activation,
    /// Activation of the transformed input; defaults to --activation.
    #[arg(long)]
    skip_activation: Option<Activation>,
    /// Skip weight in (0, 1); required for skip-alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Defaults to the norm-preserving value for the variant and activation.
    #[arg(long)]
    c_sigma: Option<f64>,
    /// sigmoid or identity.
    #[arg(long, default_value = "sigmoid")]
    output_head: OutputHead,
    /// hadamard (default) or recursive.
    #[arg(long, default_value = "hadamard")]
    ntk_form: NtkForm,
}

#[derive(Debug, Args, Serialize)]
struct OutArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ComputeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    arch: ArchArgs,
    #[arg(long)]
    depth: usize,
    /// Write the kernel as text instead of binary.
    #[arg(long)]
    text: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    /// Kernel file written by compute-ntk (`.bin` is read as binary).
    #[arg(long)]
    kernel: PathBuf,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    labels: LabelArgs,
    /// Ridge added to the labeled block; default 1e-8 · trace / m.
    #[arg(long)]
    ridge: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    labels: LabelArgs,
    #[command(flatten)]
    arch: ArchArgs,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',', required = true, num_args = 0..)]
    depths: Vec<usize>,
    #[arg(long)]
    ridge: Option<f64>,
    /// Record wall-clock seconds per depth in the CSV.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
struct AlignArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    arch: ArchArgs,
    #[arg(long, value_delimiter = ',', required = true, num_args = 0..)]
    depths: Vec<usize>,
    /// Number of leading eigenvectors.
    #[arg(long, default_value_t = gcn_ntk::analysis::DEFAULT_K)]
    k: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    seed: u64,
    /// Width of the wide network in the empirical-kernel check.
    #[arg(long, default_value_t = 1024)]
    width: usize,
    /// Monte Carlo draws in the empirical-kernel check.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// hadamard (default) or recursive.
    #[arg(long, default_value = "hadamard")]
    ntk_form: NtkForm,
    /// Dataset directory for the optional Cora check.
    #[arg(long)]
    cora_dir: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    labels: LabelArgs,
    #[command(flatten)]
    arch: ArchArgs,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[command(flatten)]
    out: OutArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    commands::run(cli.command)
}
