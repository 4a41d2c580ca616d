//! Subcommands of the `gesture-sig` binary.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;
pub use config::RunConfig;

/// Failure classes that map onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::Runtime(e)
    }
}

impl From<gesture_sig::Error> for CliError {
    fn from(e: gesture_sig::Error) -> Self {
        Self::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "gesture-sig", version, about = "Path-signature gesture recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic gesture dataset.
    Synth(SynthArgs),
    /// Compute feature vectors for every sequence of a dataset.
    Featurize(FeaturizeArgs),
    /// Train a network and write a checkpoint plus per-epoch metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on a toy network.
    Gradcheck(GradcheckArgs),
    /// Report per-layer and signature-extraction mult-adds.
    CountOps(CountOpsArgs),
    /// Write a stream's first-layer weights as CSV.
    DumpWeights(DumpWeightsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

/// Overrides applied on top of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory (sequences.jsonl + manifest.json).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Network variant: 1s, 2s or 3s.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long, value_enum)]
    pub ttm: Option<Switch>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Comma-separated input families of a 1s net (rc,s_ps,t_ps,t_s_ps).
    #[arg(long, value_delimiter = ',')]
    pub inputs: Option<Vec<String>>,
    /// Frames after resampling.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Spatial signature depth.
    #[arg(long = "m-s")]
    pub m_s: Option<usize>,
    /// Temporal signature depth.
    #[arg(long = "m-t")]
    pub m_t: Option<usize>,
    /// Temporal-spatial signature depth.
    #[arg(long = "m-ts")]
    pub m_ts: Option<usize>,
    /// Dyadic level of the temporal features.
    #[arg(long = "l-t")]
    pub l_t: Option<usize>,
    /// Dyadic level of the temporal-spatial features.
    #[arg(long = "l-ts")]
    pub l_ts: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Initial learning rate.
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Learning-rate decay per mini-batch.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Augmentations: all, none, or a comma-separated subset of
    /// temporal,rotation,noise.
    #[arg(long, value_delimiter = ',')]
    pub aug: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    /// Training clips per class.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub val_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Raw frames per clip.
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    /// Start-time jitter in frames.
    #[arg(long, default_value_t = 5)]
    pub jitter: i64,
    /// Per-coordinate sensor noise in metres.
    #[arg(long, default_value_t = 0.005)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Output JSONL (defaults to <data>/features.jsonl).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Only print the closed-form dimensional breakdown.
    #[arg(long)]
    pub report_dims: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Output directory for model.ckpt, metrics.csv and config.toml.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Split to evaluate: train, val or test.
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value = "3s")]
    pub arch: String,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub ttm: Switch,
    #[arg(long, default_value_t = 3)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 3)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CountOpsArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DumpWeightsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub stream: usize,
    #[arg(long)]
    pub out: PathBuf,
}
