//! `mkr`: preprocessing, training, evaluation, sweeps and theory checks.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mkr::MkrError;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "mkr", version, about = "Joint recommender and knowledge-graph-embedding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the commands that train.
#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// key=value configuration file (`#` comments).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Processed bundle directory; overrides `data=` in the config.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `out=` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Extra key=value settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Generator settings left at their defaults unless given.
#[derive(Args, Debug, Clone, Default)]
pub struct SynthShape {
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub interactions_per_user: Option<usize>,
    #[arg(long)]
    pub triples_per_entity: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Raw ratings + graph + alignment → processed, split bundle.
    Preprocess {
        /// user⟨TAB⟩item⟨TAB⟩rating
        #[arg(long)]
        ratings: PathBuf,
        /// head⟨TAB⟩relation⟨TAB⟩tail
        #[arg(long)]
        kg: PathBuf,
        /// item⟨TAB⟩entity
        #[arg(long)]
        alignment: PathBuf,
        /// Ratings at or above this are positive; every rating when absent.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes a synthetic bundle with planted item/entity correlation.
    Synth {
        #[arg(long, default_value_t = 500)]
        users: usize,
        #[arg(long, default_value_t = 500)]
        items: usize,
        #[arg(long, default_value_t = 500)]
        entities: usize,
        #[arg(long, default_value_t = 4)]
        relations: usize,
        #[arg(long, default_value_t = 0.9)]
        correlation: f64,
        #[command(flatten)]
        shape: SynthShape,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains and writes the best checkpoint with a JSON-lines epoch log.
    Train(RunArgs),
    /// Test-split metrics of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated cut-offs; an empty string skips top-K.
        #[arg(long, default_value = "1,2,5,10,20,50,100")]
        ks: String,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_parser = ["json", "csv"], default_value = "json")]
        format: String,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train+evaluate over the configured sweep axes; one CSV row per cell.
    Sweep(RunArgs),
    /// Runs the theory checks and gradient checks; JSON lines on stdout.
    Verify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        gradient_seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Done,
    VerifyFailed,
}

fn exit_code(err: &MkrError) -> u8 {
    match err {
        MkrError::Config(_) | MkrError::Contract(_) => EXIT_USAGE,
        MkrError::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Preprocess {
            ratings,
            kg,
            alignment,
            threshold,
            seed,
            out,
        } => commands::preprocess(&ratings, &kg, &alignment, threshold, seed, &out),
        Command::Synth {
            users,
            items,
            entities,
            relations,
            correlation,
            shape,
            seed,
            out,
        } => commands::synth(users, items, entities, relations, correlation, &shape, seed, &out),
        Command::Train(args) => commands::train(&args),
        Command::Eval {
            checkpoint,
            data,
            ks,
            split,
            format,
            out,
        } => commands::eval(&checkpoint, &data, &ks, &split, &format, out.as_deref()),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Verify {
            trials,
            gradient_seeds,
            seed,
            out,
        } => commands::verify(trials, gradient_seeds, seed, out.as_deref()),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerifyFailed) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
