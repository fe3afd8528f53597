//! `tempocap` command-line front end.
//!
//! Every command reads its inputs from files, writes data to `--out` (or
//! standard output) and diagnostics to standard error. Exit status is 0 on
//! success, 1 when the inputs are rejected, 2 on a usage error.

mod commands;
mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::run;

/// Default number of compositions, the size of the synthetic training set.
pub const DEFAULT_COUNT: u64 = 5000;

#[derive(Debug, Parser)]
#[command(
    name = "tempocap",
    version,
    about = "Temporally segmented music caption toolkit"
)]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, env = "TEMPOCAP_SEED", default_value_t = 0, global = true)]
    pub seed: u64,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a clip corpus file.
    Validate(ValidateArgs),
    /// Sample synthetic compositions from a clip corpus.
    Compose(ComposeArgs),
    /// Render LLM instruction prompts.
    RenderPrompt(RenderPromptArgs),
    /// Parse a segmented caption text file.
    Parse(ParseArgs),
    /// Rank audio documents for each text document.
    Retrieve(RetrieveArgs),
    /// Score hypothesis captions against references.
    EvalCaptions(EvalCaptionsArgs),
    /// Recall@K and median rank of saved rankings.
    EvalRetrieval(EvalRetrievalArgs),
    /// Token, vocabulary, segment and change statistics of a caption file.
    Stats(StatsArgs),
    /// Mean audio/text embedding cosine.
    ClapScore(ClapScoreArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub clips: PathBuf,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[arg(long)]
    pub clips: PathBuf,
    #[arg(long, default_value_t = DEFAULT_COUNT, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// Softmax temperature of the similarity weighting.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Always place the seed clip first in its composition.
    #[arg(long)]
    pub force_include_seed: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct RenderPromptArgs {
    /// Output of `compose`; renders the paraphrase prompt per plan.
    #[arg(long)]
    pub plans: Option<PathBuf>,
    /// JSONL of `{id, genre, bpm, segments: [{start, end, label}]}`;
    /// renders the annotation-conditioned captioning prompt.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParseFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Caption text file.
    pub input: PathBuf,
    /// `json` for the structured form, `text` for canonical caption text.
    #[arg(long, value_enum, default_value_t = ParseFormat::Json)]
    pub format: ParseFormat,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub text_docs: PathBuf,
    #[arg(long)]
    pub audio_docs: PathBuf,
    /// JSON object mapping query id to its relevant item id.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
    pub k: Vec<usize>,
    /// Window length in seconds for documents given as per-window embeddings.
    #[arg(long, default_value_t = tempocap_core::retrieval::DEFAULT_WINDOW_S)]
    pub window_s: f64,
    /// Use each document's `global_embedding` as an extra whole-track part.
    #[arg(long)]
    pub include_global: bool,
}

#[derive(Debug, Args)]
pub struct EvalRetrievalArgs {
    /// Output of `retrieve`.
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Global caption only.
    Global,
    /// Global caption, segment descriptions and change notes.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum MetricName {
    Bleu,
    #[value(alias = "rouge-l", alias = "rouge_l")]
    Rouge,
    Meteor,
    #[value(alias = "bert-score", alias = "bert_score")]
    Bertscore,
}

#[derive(Debug, Args)]
pub struct EvalCaptionsArgs {
    /// JSONL of `{id, caption}` with caption text.
    #[arg(long)]
    pub hyp: PathBuf,
    /// Same format; several lines with one id give several references.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MetricName::Bleu, MetricName::Rouge, MetricName::Meteor])]
    pub metrics: Vec<MetricName>,
    #[arg(long, value_enum, default_value_t = Mode::Complete)]
    pub mode: Mode,
    /// BLEU n-gram order.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub bleu_order: u64,
    /// Token embeddings of the hypotheses (`{id, tokens, embeddings}` JSONL),
    /// required by `bertscore`.
    #[arg(long)]
    pub hyp_embeddings: Option<PathBuf>,
    /// Token embeddings of the references, required by `bertscore`.
    #[arg(long)]
    pub ref_embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// JSONL of `{id, caption}`.
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClapScoreArgs {
    /// JSONL of `{id, embedding}` audio embeddings.
    #[arg(long)]
    pub audio: PathBuf,
    /// JSONL of `{id, embedding}` text embeddings, joined on id.
    #[arg(long)]
    pub text: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Failure,
    Usage,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
            ExitStatus::Usage => 2,
        }
    }
}

impl CliError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Input(_) | CliError::Output(_) => ExitStatus::Failure,
        }
    }
}

/// Parses `args` (program name first), runs the command and reports any
/// error on standard error.
pub fn main_with_args<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Usage
            } else {
                ExitStatus::Success
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitStatus::Success,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_status()
        }
    }
}
