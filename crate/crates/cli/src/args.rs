use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wlrbg", version, about = "Block-weighted low-rank background modeling")]
pub struct Cli {
    /// Settings file of `key = value` lines; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic video with ground truth.
    Synth(SynthArgs),
    /// Split a frame sequence into background and foreground.
    Decompose(DecomposeArgs),
    /// Closed-form constrained low-rank baseline.
    Ghs(GhsArgs),
    /// Compare recovered frames against ground truth.
    Metrics(MetricsArgs),
    /// Run the weighted solver on a numeric CSV matrix.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Batch,
    Incremental,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Data,
    Background,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Number of batches (incremental mode).
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// SVT threshold for the first batch [default: 5·√(m·n₁)].
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 500.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub eps: f64,
    #[arg(long = "max-iter", default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 2)]
    pub i1: usize,
    #[arg(long, default_value_t = 1)]
    pub i2: usize,
    #[arg(long, default_value_t = 1)]
    pub ir: usize,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "init-rank", default_value_t = 1)]
    pub init_rank: usize,
    /// Fixed foreground threshold instead of the histogram choice.
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long = "prior-source", value_enum, default_value_t = PriorArg::Data)]
    pub prior_source: PriorArg,
    /// Also write the signed residual, mapped to (F + 255) / 2.
    #[arg(long = "raw-foreground")]
    pub raw_foreground: bool,
}

#[derive(Debug, Args)]
pub struct GhsArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long, value_name = "DIR")]
    pub truth: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub result: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub masks: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 11, value_parser = parse_window)]
    pub window: usize,
}

fn parse_window(s: &str) -> Result<usize, String> {
    match s {
        "11" => Ok(11),
        "9" => Ok(9),
        _ => Err(format!("window must be 11 or 9, got {s}")),
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_name = "CSV")]
    pub matrix: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value_t = 500.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub eps: f64,
    #[arg(long = "max-iter", default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "CSV")]
    pub trace: Option<PathBuf>,
    /// Write the low-rank approximation `(X₁ X₂)` here.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}
