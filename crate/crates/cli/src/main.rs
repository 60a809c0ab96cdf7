//! `resde` experiment runner.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numeric
//! failure (non-finite state), 4 degenerate data (e.g. all-zero errors).

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::commands::RunContext;
use crate::config::{Command, ExperimentConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] resde::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("thread pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(resde::Error::Numeric(_)) => 3,
            CliError::Core(resde::Error::Degenerate(_)) => 4,
            CliError::Core(_) | CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Pool(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "resde", version, about = "Randomized Euler experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Strong-error estimates over an (n, M) schedule and the cost/error fit.
    Convergence(ProblemArgs),
    /// Monte Carlo drift error law and the EM-vs-randomized-Euler gap.
    LemmaCheck(ProblemArgs),
    /// Optimizer comparison from shared random initial points.
    OptimizeBench(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML experiment file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: results)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate the configuration and print the planned job count
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Catalog problem name, overriding the config file
    #[arg(long)]
    problem: Option<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, common, problem) = match cli.command {
        Cmd::Convergence(a) => (Command::Convergence, a.common, a.problem),
        Cmd::LemmaCheck(a) => (Command::LemmaCheck, a.common, a.problem),
        Cmd::OptimizeBench(c) => (Command::OptimizeBench, c, None),
    };
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::Config(format!(
                "config is for '{}' but '{}' was invoked",
                c.name(),
                command.name()
            )));
        }
    }
    if let Some(name) = problem {
        match command {
            Command::Convergence => cfg.convergence.problem = name,
            Command::LemmaCheck => cfg.lemma.problem = name,
            Command::OptimizeBench => {}
        }
    }
    let ctx = RunContext {
        seed: common.seed.unwrap_or(cfg.seed),
        out: common.out.or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("results")),
        dry_run: common.dry_run,
    };
    let threads = common.threads.or(cfg.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| match command {
        Command::Convergence => commands::convergence(&cfg.convergence, &ctx),
        Command::LemmaCheck => commands::lemma_check(&cfg.lemma, &ctx),
        Command::OptimizeBench => commands::optimize_bench(&cfg.bench, &ctx),
    })
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
