use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

/// An error caused by the invocation rather than by the computation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "actmap", version, about = "Cross-domain dialogue policy transfer")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a source-domain GP policy and save it with its dialogues.
    TrainSource(commands::TrainSourceArgs),
    /// Build one transfer variant for a target domain and evaluate it.
    Transfer(commands::TransferArgs),
    /// Run a learning-curve grid and write the CSV and heatmaps.
    Experiment(commands::ExperimentArgs),
    /// Evaluate a saved policy with the simulated user.
    Eval(commands::EvalArgs),
    /// Write the matrices of a saved mapping as CSV and SVG.
    ExportMapping(commands::ExportArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use actmap_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. }
                | E::Parse { .. }
                | E::Csv { .. }
                | E::Schema(_)
                | E::InvalidConstraint(_)
                | E::Unknown { .. }
                | E::Config(_)
                | E::MissingIngredient { .. } => 2,
                _ => 3,
            };
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    if cli.common.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.jobs)
        .build_global()
    {
        log::warn!("thread pool already initialized: {e}");
    }
    let result = match &cli.command {
        Command::TrainSource(a) => commands::train_source(&cli.common, a),
        Command::Transfer(a) => commands::transfer(&cli.common, a),
        Command::Experiment(a) => commands::experiment(&cli.common, a),
        Command::Eval(a) => commands::eval(&cli.common, a),
        Command::ExportMapping(a) => commands::export(&cli.common, a),
    };
    match result {
        Ok(json) => {
            println!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
