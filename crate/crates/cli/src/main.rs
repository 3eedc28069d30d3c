//! `ctxtag`: pretrain character LMs, train and evaluate taggers, run studies.

mod commands;
mod config;
mod stack;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Data(String),

    #[error("cannot read {0}: {1}")]
    Input(PathBuf, #[source] std::io::Error),

    #[error("cannot write {0}: {1}")]
    Output(PathBuf, #[source] std::io::Error),

    #[error(transparent)]
    Core(#[from] ctxtag::Error),
}

impl CliError {
    /// 2 for configuration and validation, 3 for data, 4 for numeric failure.
    pub fn exit_code(&self) -> u8 {
        use ctxtag::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Input(..) | CliError::Output(..) => 3,
            CliError::Core(e) => match e {
                E::Config(_) | E::Checkpoint(_) | E::Model(_) | E::PrecisionMismatch { .. } => 2,
                E::Numeric(_) | E::Dimension { .. } | E::Graph(_) => 4,
                E::Parse { .. }
                | E::Ingest { .. }
                | E::Format(_)
                | E::Coverage { .. }
                | E::TagSet(_)
                | E::Evaluation { .. }
                | E::Io { .. } => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ctxtag", version, about = "Character-LM string embeddings and BiLSTM-CRF tagging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Flat key = value config file.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Override a config key (repeatable); wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a forward and a backward character LM on raw text.
    Pretrain(RunArgs),
    /// Continue pretraining an existing LM pair on more text.
    Continue(RunArgs),
    /// Train a tagger on a corpus with an embedder stack.
    Train(RunArgs),
    /// Score a saved tagger on one corpus split.
    Evaluate(RunArgs),
    /// Dump per-token stack vectors in the external-vectors format.
    Embed(RunArgs),
    /// Write the corpus files of two merged corpora.
    Merge(RunArgs),
    /// Run a pretrain-amount, stacking or merging study.
    Study(RunArgs),
}

type Handler = fn(&RunConfig) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, f): (&RunArgs, Handler) = match &cli.command {
        Command::Pretrain(a) => (a, commands::pretrain),
        Command::Continue(a) => (a, commands::continue_),
        Command::Train(a) => (a, commands::train),
        Command::Evaluate(a) => (a, commands::evaluate_cmd),
        Command::Embed(a) => (a, commands::embed),
        Command::Merge(a) => (a, commands::merge),
        Command::Study(a) => (a, commands::study),
    };
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    cfg.apply_overrides(&args.overrides)?;
    f(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
