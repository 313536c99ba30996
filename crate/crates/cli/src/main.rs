//! Batch experiment driver for the PCM simulator.
//!
//! `pcmsim run` executes a recipe file and writes a deterministic
//! artifact set (manifest, metrics, snapshots, curves); `pcmsim
//! validate` checks configuration files and reports violations.
//!
//! Exit codes: 0 success, 1 invariant or runtime failure, 2 usage or
//! configuration error.

mod manifest;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use runner::{run_recipe, validate_paths, CliError, Recipe};

#[derive(Parser)]
#[command(name = "pcmsim", version, about = "Phase-change memory array simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment recipe and emit its artifacts.
    Run {
        /// Recipe file (key = value format with a `kind` key).
        #[arg(long)]
        recipe: PathBuf,
        /// Output directory for artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Override the recipe's `seed` key.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores). Results do not depend
        /// on this.
        #[arg(long)]
        workers: Option<usize>,
        /// Override any recipe key, e.g. `--set p=0.02`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Validate configuration files; exits 0 only when clean.
    Validate {
        /// Device parameter files or recipe files.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(CliError::Config(m)) => {
            eprintln!("pcmsim: config error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Run(m)) => {
            eprintln!("pcmsim: {m}");
            ExitCode::from(1)
        }
    }
}

fn dispatch() -> Result<ExitCode, CliError> {
    match Cli::parse().command {
        Command::Run {
            recipe,
            out,
            seed,
            workers,
            set,
        } => {
            let overrides = parse_overrides(&set)?;
            let recipe = Recipe::load(&recipe)?;
            let body = || run_recipe(&recipe, &out, seed, &overrides);
            match workers {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n.max(1))
                        .build()
                        .map_err(|e| CliError::Run(e.to_string()))?;
                    pool.install(body)?;
                }
                None => body()?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { paths } => {
            let report = validate_paths(&paths);
            if report.is_empty() {
                println!("ok: {} file(s) validated", paths.len());
                Ok(ExitCode::SUCCESS)
            } else {
                for line in &report {
                    println!("violation: {line}");
                }
                Ok(ExitCode::from(2))
            }
        }
    }
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>, CliError> {
    set.iter()
        .map(|entry| {
            entry
                .split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{entry}`")))
        })
        .collect()
}
