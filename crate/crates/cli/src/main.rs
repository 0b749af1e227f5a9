//! `coexist`: JSON-configured runs of the predator-prey laboratory.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 numerical
//! failure, 3 violated model assumption.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Failure, Output};

#[derive(Debug, Parser)]
#[command(name = "coexist", version, about = "Predator-prey coexistence laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file; omitted keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one key, e.g. `model.theta=0.5`; repeatable, applied in order.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Write artifacts into this directory instead of printing the primary one.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Random seed (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Sampled check of the model hypotheses.
    Check,
    /// Principal eigenpair of the resource or predator weight.
    Eig,
    /// Prey-only steady profile.
    Logistic,
    /// Threshold quantities of the semi-trivial state.
    Thresholds,
    /// Existence verdict for one parameter set.
    Regime,
    /// Verdict table over two parameter axes.
    Sweep,
    /// Coexistence steady state.
    Steady,
    /// Time integration of the original system.
    Evolve,
    /// Limiting profile for extreme diffusion rates.
    Asympt,
    /// Invariant suites with a pass/fail table.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Eig => "eig",
            Command::Logistic => "logistic",
            Command::Thresholds => "thresholds",
            Command::Regime => "regime",
            Command::Sweep => "sweep",
            Command::Steady => "steady",
            Command::Evolve => "evolve",
            Command::Asympt => "asympt",
            Command::Verify => "verify",
        }
    }
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    let text = match &cli.config {
        Some(path) => Some(
            std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?,
        ),
        None => None,
    };
    let name = cli.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
    let config = config::resolve(text.as_deref().map(|t| (name.as_str(), t)), &cli.overrides, cli.seed)
        .map_err(Failure::usage)?;
    let grid = config.grid().map_err(Failure::usage)?;
    let ctx = Context { command: cli.command.name(), config, grid };
    match cli.command {
        Command::Check => commands::check(&ctx),
        Command::Eig => commands::eig(&ctx),
        Command::Logistic => commands::logistic(&ctx),
        Command::Thresholds => commands::thresholds(&ctx),
        Command::Regime => commands::regime(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Steady => commands::steady(&ctx),
        Command::Evolve => commands::evolve(&ctx),
        Command::Asympt => commands::asympt(&ctx),
        Command::Verify => commands::verify(&ctx),
    }
}

fn emit(cli: &Cli, out: &Output) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::usage(format!("cannot write output: {e}"));
    let mut stdout = std::io::stdout().lock();
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io)?;
            for a in &out.artifacts {
                let path = a.write_to(dir).map_err(io)?;
                writeln!(stdout, "{}", path.display()).map_err(io)?;
            }
        }
        None => {
            if let Some(a) = out.artifacts.first() {
                stdout.write_all(&a.render().map_err(io)?).map_err(io)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let failure = match run(&cli) {
        Ok(out) => match emit(&cli, &out) {
            Ok(()) => out.failure,
            Err(f) => Some(f),
        },
        Err(f) => Some(f),
    };
    match failure {
        None => ExitCode::SUCCESS,
        Some(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
