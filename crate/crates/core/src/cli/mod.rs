//! Command-line surface: `synth`, `train`, `eval`, `ablate` and `embed`.
//!
//! Every command is also callable as a library function taking its parsed
//! arguments, which is how the tests drive them.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{cmd_ablate, cmd_embed, cmd_eval, cmd_synth, cmd_train, EmbedOutput, SynthSummary, TrainSummary};
pub use config::{default_run_dir, parse_grid, parse_pairs, Overrides, RunConfig, RUN_CONFIG_FILE, RUN_ROOT_ENV};

use crate::chemdata::{Modality, PairKind, Split};
use crate::evaluation::Direction;

#[derive(Debug, Parser)]
#[command(name = "bindcore", version, about = "Contrastive alignment of molecular modalities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic four-modality dataset.
    Synth(SynthArgs),
    /// Train encoders on pair manifests.
    Train(TrainArgs),
    /// Score retrieval for one direction with a checkpoint.
    Eval(EvalArgs),
    /// Train one model per pair-kind configuration and tabulate L2G / L2C.
    Ablate(AblateArgs),
    /// Embed one record with a checkpoint.
    Embed(EmbedArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long = "latent-dim", default_value_t = 8)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub overwrite: bool,
}

fn pair_kind(s: &str) -> Result<PairKind, String> {
    s.trim().parse().map_err(|e: crate::error::Error| e.to_string())
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct TrainingFlags {
    /// TOML file with `[alignment]` and `[encoders]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated pair kinds; all four when omitted.
    #[arg(long, value_delimiter = ',', value_parser = pair_kind)]
    pub pairs: Option<Vec<PairKind>>,
    /// Defaults to `$BINDCORE_RUN_ROOT/train-seed<seed>`.
    #[arg(long = "run-dir")]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
    #[command(flatten)]
    pub flags: TrainingFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Batch,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Pretrain,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Pretrain => Split::Pretrain,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

fn direction(s: &str) -> Result<Direction, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

#[derive(Debug, Clone, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// One of g2l, l2g, c2l, l2c, c2p, p2c, g2c, c2g.
    #[arg(long, value_parser = direction)]
    pub direction: Direction,
    #[arg(long, value_enum, default_value = "batch")]
    pub mode: EvalMode,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long = "batch-size", default_value_t = crate::evaluation::EVAL_BATCH_SIZE)]
    pub batch_size: usize,
    /// Where to write the report; defaults to the checkpoint's directory.
    #[arg(long = "run-dir")]
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// TOML grid of `[[configuration]] pairs = [...]` tables.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TrainingFlags,
}

fn modality(s: &str) -> Result<Modality, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

#[derive(Debug, Clone, clap::Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Plain text for language, SDF for graph, XYZ for conformation/protein.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = modality)]
    pub modality: Modality,
}

/// Parses `args` (program name first), runs the command, prints its JSON
/// result to stdout and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let out = match cli.command {
        Command::Synth(a) => cmd_synth(&a).and_then(|s| Ok(serde_json::to_string_pretty(&s)?)),
        Command::Train(a) => cmd_train(&a).and_then(|s| Ok(serde_json::to_string_pretty(&s)?)),
        Command::Eval(a) => cmd_eval(&a).and_then(|r| Ok(serde_json::to_string_pretty(&r)?)),
        Command::Ablate(a) => cmd_ablate(&a).and_then(|t| t.to_csv()),
        Command::Embed(a) => cmd_embed(&a).and_then(|e| Ok(serde_json::to_string(&e)?)),
    };
    match out {
        Ok(text) => {
            println!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
