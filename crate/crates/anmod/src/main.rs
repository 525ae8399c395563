//! Command-line entry: `run`, `batch`, `sweep`, and `report`.
//!
//! Exit codes for `run` follow the optimization outcome: 0 SUCCESS,
//! 2 DIVERGED, 3 MAX_ITER, 4 EVALUATOR_ERROR; configuration problems exit 1
//! after printing the validation report. The other commands exit 0 on
//! completion and 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use anmod::runner::{self, RunConfig, RunOverrides};

#[derive(Parser)]
#[command(
    name = "anmod",
    version,
    about = "Model-guided multi-parameter design optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one optimization run from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Iteration cap override.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Adjustment rate override.
        #[arg(long)]
        adjustment_rate: Option<f64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run many optimizations from bounds-uniform random initial designs.
    Batch {
        #[arg(long)]
        config: PathBuf,
        /// Number of sampled initial designs; falls back to the config's
        /// [sampling] count.
        #[arg(long)]
        n: Option<usize>,
        /// Master seed for sampling and per-run seeds; falls back to the
        /// config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the backend along explicit values of one design variable and
    /// fit a power law per reported parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        variable: String,
        /// Comma-separated values, e.g. --values 5000,6000,7000
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Build convergence CSVs and SVG charts from a run's history file.
    Report {
        #[arg(long)]
        history: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            seed,
            max_iter,
            adjustment_rate,
            out,
        } => {
            let overrides = RunOverrides {
                seed,
                max_iterations: max_iter,
                adjustment_rate,
                output_dir: out,
            };
            cmd_run(&config, overrides)
        }
        Command::Batch { config, n, seed } => cmd_batch(&config, n, seed),
        Command::Sweep {
            config,
            variable,
            values,
        } => cmd_sweep(&config, &variable, &values),
        Command::Report { history } => cmd_report(&history),
    };
    ExitCode::from(code)
}

fn fail(error: impl std::fmt::Display) -> u8 {
    eprintln!("{error}");
    1
}

fn cmd_run(path: &Path, overrides: RunOverrides) -> u8 {
    let mut config = match RunConfig::load(path) {
        Ok(config) => config,
        Err(e) => return fail(e),
    };
    config.apply(&overrides);
    match runner::execute_run(&config) {
        Ok(outcome) => {
            let history = &outcome.history;
            println!(
                "{}: {} after {} iterations",
                config.name,
                history.status,
                history.records.len().saturating_sub(1)
            );
            if let Some(message) = &history.message {
                println!("  {message}");
            }
            println!("history: {}", outcome.dir.join("history.jsonl").display());
            outcome.exit_code() as u8
        }
        Err(e) => fail(e),
    }
}

fn cmd_batch(path: &Path, n: Option<usize>, seed: Option<u64>) -> u8 {
    let config = match RunConfig::load(path) {
        Ok(config) => config,
        Err(e) => return fail(e),
    };
    let Some(n) = n.or_else(|| config.sampling.as_ref().and_then(|s| s.count)) else {
        return fail("batch needs --n or a [sampling] count in the config");
    };
    let master_seed = seed.unwrap_or(config.seed);
    match runner::execute_batch(&config, n, master_seed) {
        Ok(outcome) => {
            println!(
                "batch {}: {}/{} SUCCESS",
                config.name,
                outcome.success_count(),
                outcome.runs.len()
            );
            println!(
                "summary: {}",
                outcome.dir.join("batch_summary.txt").display()
            );
            0
        }
        Err(e) => fail(e),
    }
}

fn cmd_sweep(path: &Path, variable: &str, values: &[f64]) -> u8 {
    let config = match RunConfig::load(path) {
        Ok(config) => config,
        Err(e) => return fail(e),
    };
    match runner::execute_sweep(&config, variable, values) {
        Ok(outcome) => {
            print!("{}", runner::render_fits(&outcome));
            println!(
                "table: {}",
                outcome.dir.join(format!("sweep_{variable}.csv")).display()
            );
            0
        }
        Err(e) => fail(e),
    }
}

fn cmd_report(path: &Path) -> u8 {
    match runner::execute_report(path) {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            0
        }
        Err(e) => fail(e),
    }
}
