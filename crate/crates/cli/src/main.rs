use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod error;
mod io;
mod manifest;

/// Preference representation toolkit: data generation, training,
/// evaluation, embedding constructions, GPO and scoring benchmarks.
#[derive(Debug, Parser)]
#[command(name = "prefrep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic preference dataset (JSONL).
    GenData(GenDataArgs),
    /// Train a GPM or BT model on a dataset.
    Train(TrainArgs),
    /// Accuracy and loss of a model on a dataset.
    Eval(EvalArgs),
    /// Embeddings realizing a skew-symmetric matrix.
    Construct(ConstructArgs),
    /// Run GPO on a score matrix.
    Gpo(GpoArgs),
    /// Count embedding evaluations for K-item score matrices.
    Bench(BenchArgs),
    /// Per-item embedding coordinates of a context.
    EmbedDump(EmbedDumpArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Cycle,
    Bt,
    Skew,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: DataKind,
    #[arg(long)]
    pub items: usize,
    #[arg(long, default_value_t = 1)]
    pub contexts: usize,
    #[arg(long, env = "PREFREP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Soft labels sigma(delta / beta) (bt only).
    #[arg(long)]
    pub soft: bool,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Comparisons per context (bt only).
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Standard deviation of the skew entries (skew only).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Also write the generating rewards as a k=1 GPM model file (bt only).
    #[arg(long)]
    pub truth_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gpm,
    Bt,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    Ce,
    Mse,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "gpm")]
    pub model_kind: ModelKind,
    /// Number of 2-D preference blocks (gpm only).
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Temperature; defaults to 0.1 for gpm and 1.0 for bt.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, env = "PREFREP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// L2-normalize embeddings before scoring (gpm only).
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, value_enum, default_value = "ce")]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Also write the result to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstructMode {
    Real,
    Complex,
    Spectral,
}

#[derive(Debug, Args, Serialize)]
pub struct ConstructArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_enum, default_value = "real")]
    pub mode: ConstructMode,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GpoMode {
    Exact,
    Sampled,
}

#[derive(Debug, Args, Serialize)]
pub struct GpoArgs {
    /// Skew score matrix as CSV.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub matrix: Option<PathBuf>,
    /// Model file; scores the items of --context.
    #[arg(long, requires = "context")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub context: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: GpoMode,
    /// Opponent samples per iteration (sampled mode).
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    #[arg(long, env = "PREFREP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Starting probabilities, comma separated; uniform if omitted.
    #[arg(long, value_delimiter = ',')]
    pub start: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub context: String,
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,64")]
    pub k_values: Vec<usize>,
    /// Also score every unordered pair separately for comparison.
    #[arg(long)]
    pub pairwise: bool,
    /// CSV report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedDumpArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub context: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Construct(a) => commands::construct(a),
        Command::Gpo(a) => commands::gpo(a),
        Command::Bench(a) => commands::bench(a),
        Command::EmbedDump(a) => commands::embed_dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
