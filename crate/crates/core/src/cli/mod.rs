//! The `famlens` command line: `generate`, `analyze`, `feedback`,
//! `simulate` and `eval`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 backend
//! failure, 3 validation failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{cmd_analyze, cmd_eval, cmd_feedback, cmd_generate, cmd_simulate, EvalArgs};
pub use config::{BackendKind, EmbeddingKind, RunConfig, Runtime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("validation: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Backend(_) => 2,
            Self::Validation(_) => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::Config(format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "famlens",
    version,
    about = "Suppressed-emotion and ideal-parent-bias analysis for parent-child dialogue"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dialogue corpus from scenario metadata.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Directory of `<id>.meta` files, or a single metadata file.
        #[arg(long)]
        metas: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect suppression, attributes and bias; write situation reports.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select expert panels and run the four-step discussion.
    Feedback {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write each scenario's full pool ranking.
        #[arg(long)]
        ranking: bool,
    },
    /// Simulate follow-up dialogues with the final feedback injected.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        feedback: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute metrics from predictions, gold labels and human ratings.
    Eval {
        /// Accepted for symmetry with the other commands; unused.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Scale of human confidence inputs: `unit` (0-1) or `percent` (0-100).
        #[arg(long, default_value = "unit")]
        confidence_scale: crate::eval::ConfidenceScale,
        /// Also write the parsed ratings back out as `ratings_raw.csv`.
        #[arg(long)]
        dump_ratings: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn runtime(path: &std::path::Path) -> Result<Runtime, CliError> {
    Runtime::new(RunConfig::load(path)?)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, metas, out } => cmd_generate(&runtime(&config)?, &metas, &out),
        Command::Analyze {
            config,
            corpus,
            out,
        } => cmd_analyze(&runtime(&config)?, &corpus, &out),
        Command::Feedback {
            config,
            corpus,
            reports,
            out,
            ranking,
        } => cmd_feedback(&runtime(&config)?, &corpus, &reports, &out, ranking),
        Command::Simulate {
            config,
            corpus,
            feedback,
            out,
        } => cmd_simulate(&runtime(&config)?, &corpus, &feedback, &out),
        Command::Eval {
            predictions,
            gold,
            ratings,
            confidence_scale,
            dump_ratings,
            out,
            ..
        } => cmd_eval(&EvalArgs {
            predictions,
            gold,
            ratings,
            confidence_scale,
            dump_ratings,
            out,
        }),
    }
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("famlens: {e}");
            e.exit_code()
        }
    }
}
