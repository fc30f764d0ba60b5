//! `translaw` command-line frontend.

mod commands;
mod human;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "translaw", version, about = "Three-agent legal translation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Translate a plain-text document, paragraphs separated by blank lines.
    Translate(TranslateArgs),
    /// Score files with weighted accuracy, coherence and style.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Per-phase API cost of a usage log.
    Cost(CostArgs),
    /// Inspect parallel corpora.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Run the HTTP server.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct TranslateArgs {
    /// Provider for the translator role.
    #[arg(long)]
    translator: String,
    /// Provider for the annotator role.
    #[arg(long)]
    annotator: String,
    /// Provider for the proofreader role.
    #[arg(long)]
    proofreader: String,
    #[arg(long, default_value = "en")]
    source: String,
    #[arg(long, default_value = "zh-Hant")]
    target: String,
    /// Term list (TSV or CSV) enforced on the output.
    #[arg(long)]
    glossary: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    rounds: u32,
    /// Neighbour window radius.
    #[arg(long)]
    pns: Option<usize>,
    /// Add similar earlier translations to translator prompts.
    #[arg(long)]
    few_shot: bool,
    /// Annotate interactively: `ERR:` lines per paragraph, blank line ends one.
    #[arg(long)]
    human: bool,
    /// Server config file supplying providers, data dir, limits and glossaries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Provider registry file (TOML or JSON).
    #[arg(long)]
    providers: Option<PathBuf>,
    /// Directory for persistent translation and proofreading memory.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output prefix; writes `<prefix>.json` and `<prefix>.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
    input: PathBuf,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Per-system means and weighted score.
    Acs {
        /// `a,b,c` summing to 1, or a preset name (acs1, acs2, acs3).
        #[arg(long, default_value = "acs2")]
        weights: String,
        scores: PathBuf,
    },
    /// Means, all presets and improvements over a baseline system.
    Report {
        #[arg(long)]
        baseline: Option<String>,
        /// Emit CSV instead of the aligned table.
        #[arg(long)]
        csv: bool,
        scores: PathBuf,
    },
}

#[derive(Debug, Args)]
struct CostArgs {
    /// Provider registry carrying per-1k token prices.
    #[arg(long)]
    prices: PathBuf,
    /// Document word count for the human quote.
    #[arg(long, requires = "human_rate")]
    words: Option<u64>,
    /// Human rate per word.
    #[arg(long, requires = "words")]
    human_rate: Option<f64>,
    /// Cost of a baseline system to compare against.
    #[arg(long)]
    baseline: Option<f64>,
    /// JSONL usage records.
    usage: PathBuf,
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Document, pair, character and token counts.
    Stats {
        #[arg(long, default_value = "en")]
        source: String,
        #[arg(long, default_value = "zh-Hant")]
        target: String,
        path: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured bind address.
    #[arg(long)]
    bind: Option<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or unusable input files.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

pub fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn runtime(e: impl ToString) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Translate(args) => commands::translate(args),
        Command::Eval(EvalCommand::Acs { weights, scores }) => commands::eval_acs(&weights, &scores),
        Command::Eval(EvalCommand::Report { baseline, csv, scores }) => {
            commands::eval_report(baseline.as_deref(), csv, &scores)
        }
        Command::Cost(args) => commands::cost(args),
        Command::Corpus(CorpusCommand::Stats { source, target, path }) => commands::corpus_stats(&source, &target, &path),
        Command::Serve(args) => commands::serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
