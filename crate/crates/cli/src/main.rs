mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::{EvaluateArgs, GenerateArgs};
use crate::config::{ConfigFile, Overrides, RunConfig, UsageError};

/// Build modifier-clause corpora, train clause generators and score their output.
#[derive(Parser)]
#[command(name = "clausegen", version)]
struct Cli {
    /// `key = value` settings file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove one modifier clause from each parsed sentence.
    Extract {
        /// Chunk-parsed sentences, one JSON object per line.
        #[arg(long)]
        input: PathBuf,
        /// Extraction records (JSONL).
        #[arg(long)]
        output: PathBuf,
    },
    /// Split extraction records into train/dev/test and build the vocabulary.
    BuildCorpus {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train the attention encoder-decoder on a built corpus.
    Train {
        /// Directory written by `build-corpus`.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Add a clause to each simple sentence.
    Generate {
        /// Directory written by `train`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Checkpoint to load instead of the model's best one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Training records to draw clauses from (retrieval mode).
        #[arg(long)]
        clauses: Option<PathBuf>,
        /// Chunk-parsed simple sentences (JSONL).
        #[arg(long)]
        input: PathBuf,
        /// Per-sentence results with n-best candidates (JSONL).
        #[arg(long)]
        output: PathBuf,
        /// Also write the best output per line, tokens separated by spaces.
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Score generated sentences with an n-gram language model.
    Evaluate {
        /// Tokenized sentences to fit the language model on.
        #[arg(long)]
        lm_corpus: PathBuf,
        /// Tokenized sentences to score.
        #[arg(long)]
        generated: PathBuf,
        /// Line-aligned references; adds corpus BLEU to the report.
        #[arg(long)]
        references: Option<PathBuf>,
        /// Score against the uniform distribution over the LM corpus vocabulary.
        #[arg(long)]
        uniform: bool,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print each sentence with its rule-chosen noun wrapped in insertion markers.
    Mark {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let config = RunConfig::resolve(&cli.overrides, &file)?;
    log::debug!("resolved config: {config:?}");
    match &cli.command {
        Command::Extract { input, output } => commands::extract(input, output, &config),
        Command::BuildCorpus { records, out_dir } => commands::build_corpus(records, out_dir, &config),
        Command::Train { corpus, out_dir } => commands::train_model(corpus, out_dir, &config),
        Command::Generate { model, checkpoint, clauses, input, output, text } => commands::generate(
            &GenerateArgs {
                model: model.as_deref(),
                checkpoint: checkpoint.as_deref(),
                clauses: clauses.as_deref(),
                input,
                output,
                text: text.as_deref(),
            },
            &config,
        ),
        Command::Evaluate { lm_corpus, generated, references, uniform, output } => commands::evaluate_outputs(
            &EvaluateArgs {
                lm_corpus,
                generated,
                references: references.as_deref(),
                uniform: *uniform,
                output: output.as_deref(),
            },
            &config,
        ),
        Command::Mark { input, output } => commands::mark(input, output.as_deref(), &config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
