//! The `zsl` command-line pipeline: each stage reads and writes files so
//! expensive stages (preprocessing, sweeps) are never repeated needlessly.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod manifest;
pub mod sweep;

pub use manifest::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] zsl_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for bad data, 2 for bad usage or an unusable environment.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_io() => 2,
            CliError::Core(zsl_core::Error::Config(_)) => 2,
            CliError::Core(_) => 1,
            CliError::Io { .. } | CliError::Usage(_) => 2,
        }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "zsl",
    version,
    about = "Zero-shot material recognition for artworks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize descriptions, drop stop words and out-of-vocabulary words
    Preprocess(PreprocessArgs),
    /// Cap every material class at a maximum number of artworks
    Balance(BalanceArgs),
    /// Build per-material descriptions from the most frequent words
    Describe(DescribeArgs),
    /// Hold out a fraction of the classes for zero-shot validation
    Split(SplitArgs),
    /// Train one model
    Train(TrainArgs),
    /// Rank materials for artworks with a trained model
    Evaluate(EvaluateArgs),
    /// Train every combination of optimizer, learning rate, batch size and depth
    Sweep(SweepArgs),
    /// Exponentially smooth a metrics CSV
    Smooth(SmoothArgs),
    /// Write a synthetic corpus (and word vectors) for trying the pipeline
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Seed for every random choice
    #[arg(long, env = "ZSL_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Input manifest (JSON lines)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Word vectors in text format: `word v1 ... vn` per line
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Stop-word list, one word per line (built-in English list if omitted)
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub embed_dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Maximum artworks per class
    #[arg(long, default_value_t = 147)]
    pub cap: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = 100)]
    pub feature_dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Words per description
    #[arg(long, default_value_t = 25)]
    pub k: usize,
    /// Sequence length fed to the text branch
    #[arg(long, default_value_t = 25)]
    pub max_len: usize,
    #[arg(long, default_value_t = 100)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub embed_dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Fraction of classes held out
    #[arg(long, default_value_t = 0.3)]
    pub fraction: f64,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = 100)]
    pub feature_dim: usize,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub val_out: PathBuf,
    /// Also write the held-out class names, one per line
    #[arg(long)]
    pub heldout_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adagrad,
    Rmsprop,
    Adam,
}

impl TrainCommon {
    pub fn optimizer(&self, kind: OptimizerArg, lr: f64) -> zsl_core::OptimConfig {
        zsl_core::OptimConfig {
            epsilon: self.epsilon,
            beta1: self.beta1,
            beta2: self.beta2,
            ..zsl_core::OptimConfig::new(kind.into(), lr)
        }
    }
}

impl From<OptimizerArg> for zsl_core::OptimKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Adagrad => zsl_core::OptimKind::Adagrad,
            OptimizerArg::Rmsprop => zsl_core::OptimKind::Rmsprop,
            OptimizerArg::Adam => zsl_core::OptimKind::Adam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DepthArg {
    Baseline,
    Medium,
    Large,
}

impl From<DepthArg> for zsl_core::Depth {
    fn from(d: DepthArg) -> Self {
        match d {
            DepthArg::Baseline => zsl_core::Depth::Baseline,
            DepthArg::Medium => zsl_core::Depth::Medium,
            DepthArg::Large => zsl_core::Depth::Large,
        }
    }
}

/// Inputs and settings shared by `train` and `sweep`.
#[derive(Debug, Args)]
pub struct TrainCommon {
    /// Training dataset
    #[arg(long)]
    pub train: PathBuf,
    /// Validation dataset (held-out classes)
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Class descriptions written by `describe`
    #[arg(long)]
    pub descriptions: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    /// Width of both branches
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Negative pairs per positive pair
    #[arg(long, default_value_t = 1)]
    pub negatives: usize,
    /// Optimizer epsilon
    #[arg(long, default_value_t = zsl_core::optim::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Adam first-moment decay
    #[arg(long, default_value_t = zsl_core::optim::DEFAULT_BETA1)]
    pub beta1: f64,
    /// Adam second-moment decay
    #[arg(long, default_value_t = zsl_core::optim::DEFAULT_BETA2)]
    pub beta2: f64,
    #[arg(long, default_value_t = 100)]
    pub feature_dim: usize,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: TrainCommon,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Rmsprop)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = DepthArg::Baseline)]
    pub depth: DepthArg,
    /// Receives checkpoint.zslm, train_loss.csv, val_acc.csv and run.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Top1Hit,
    ExactSet,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Artworks to classify
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub descriptions: PathBuf,
    /// Predictions CSV: id,rank,material,score
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Top1Hit)]
    pub metric: MetricArg,
    /// Ranked materials written per artwork (all if omitted)
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub feature_dim: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: TrainCommon,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "adagrad,rmsprop,adam"
    )]
    pub optimizers: Vec<OptimizerArg>,
    #[arg(long, value_delimiter = ',', default_value = "0.001")]
    pub lrs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "128")]
    pub batch_sizes: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "baseline")]
    pub depths: Vec<DepthArg>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Cells trained concurrently
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Centre of mass; alpha = 1 / (1 + com)
    #[arg(long, default_value_t = 5.0)]
    pub com: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Single-label classes with planted text/image structure, plus word vectors
    Zsl,
    /// Multi-label Zipf-distributed classes (no descriptions)
    Zipf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Zsl)]
    pub kind: SynthKind,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Writes manifest.jsonl (and embeddings.txt for `zsl`)
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Preprocess(a) => commands::preprocess(&a),
        Command::Balance(a) => commands::balance(&a),
        Command::Describe(a) => commands::describe(&a),
        Command::Split(a) => commands::split(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Sweep(a) => sweep::sweep(&a),
        Command::Smooth(a) => commands::smooth(&a),
        Command::Synth(a) => commands::synth(&a),
    }
}
