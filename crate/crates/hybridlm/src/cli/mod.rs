//! `hybridlm` command line: argument parsing and dispatch.

mod data;
mod plan;
mod train;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hybridlm_core::corpus::LossPolicy;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "hybridlm",
    version,
    about = "Hybrid-tuning toolkit: data generation, mixing, training, evaluation and planning."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate instruction records with Self-Instruct or Self-QA.
    GenData(GenDataArgs),
    /// Shuffle a four-stream corpus into one training order.
    Mix(MixArgs),
    /// Train a model from a TOML run configuration.
    Train(TrainArgs),
    /// Report the perplexity of a checkpoint on an evaluation set.
    Eval(EvalArgs),
    /// Compare sequential two-stage training against one-stage hybrid tuning.
    CompareRegimes(CompareArgs),
    /// Parameter count, pipeline partition and ZeRO stage 1 memory for a preset.
    Plan(PlanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    SelfInstruct,
    SelfQa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Full,
    ResponseOnly,
}

impl From<PolicyArg> for LossPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Full => LossPolicy::Full,
            PolicyArg::ResponseOnly => LossPolicy::ResponseOnly,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Seed instructions (self-instruct) or source documents and structured records (self-qa), JSON lines.
    #[arg(long)]
    pub seeds: PathBuf,
    #[arg(long, value_enum, default_value = "self-instruct")]
    pub mode: Mode,
    /// Use the offline deterministic mock instead of a live endpoint.
    #[arg(long)]
    pub mock: bool,
    /// Fraction of mock answers left empty, to exercise parse-failure accounting.
    #[arg(long, default_value_t = 0.0)]
    pub mock_malformed_rate: f64,
    /// Output records, JSON lines. Stats and manifest are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Records to produce (self-instruct).
    #[arg(long, default_value_t = 32)]
    pub target: usize,
    /// Pairs per request (self-instruct) or per source (self-qa).
    #[arg(long, default_value_t = 4)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Completion endpoint URL, required without --mock.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = crate::client::TOKEN_ENV)]
    pub token_env: String,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// Directory of `*.jsonl` corpus files (or one file).
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub epoch: u64,
    /// Repetitions of the general-pretrain, financial-pretrain, general-instruction and financial-instruction streams.
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 1, 1, 1])]
    pub repetition: Vec<u32>,
    /// Shuffled documents, JSON lines. Manifest is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for checkpoint, reports and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many steps in this invocation.
    #[arg(long)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Documents to score, JSON lines.
    #[arg(long)]
    pub eval_set: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Full)]
    pub loss_policy: PolicyArg,
    /// Optional directory for the JSON report and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the seeds of the `[regimes]` section.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Also run the comparison under the other loss policy and report both.
    #[arg(long)]
    pub both_loss_policies: bool,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value = "pretrain")]
    pub phase: String,
    /// Pipeline stages.
    #[arg(long, default_value_t = 1)]
    pub stages: usize,
    /// Data-parallel ranks sharing the optimizer state.
    #[arg(long, default_value_t = 1)]
    pub dp_ranks: usize,
    /// Optional directory for the JSON report and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command, writing the
/// human-readable summary to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            write!(out, "{}", e.render()).map_err(stdout_err)?;
            return Ok(());
        }
        Err(e) => return Err(Error::Usage(e.render().to_string())),
    };
    let argv: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match cli.command {
        Command::GenData(a) => data::gen_data(&a, &argv, out),
        Command::Mix(a) => data::mix(&a, &argv, out),
        Command::Train(a) => train::train(&a, &argv, out),
        Command::Eval(a) => train::eval(&a, &argv, out),
        Command::CompareRegimes(a) => train::compare(&a, &argv, out),
        Command::Plan(a) => plan::plan(&a, &argv, out),
    }
}

pub(crate) fn stdout_err(e: std::io::Error) -> Error {
    Error::output(Path::new("<stdout>"), e)
}

/// `<file>.<suffix>` next to `file`, e.g. `out.jsonl.manifest.json`.
pub(crate) fn sibling(file: &Path, suffix: &str) -> PathBuf {
    let mut name = file.file_name().map(OsString::from).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    file.with_file_name(name)
}

pub(crate) fn to_json(v: &impl serde::Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}
