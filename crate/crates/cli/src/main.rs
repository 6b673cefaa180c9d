//! `magflow <subcommand> <config.ini>`: runs one pipeline, writes artifacts
//! into the configured output directory and prints a one-line JSON summary.
//!
//! Exit status: 0 on success, 1 when a solver reports non-convergence
//! (the outcome is in the summary), 2 on configuration or domain errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::run::Subcommand;

#[derive(Parser, Debug)]
#[command(name = "magflow", version, about = "Magnetic geodesic flows on closed surfaces")]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// INI file with [surface], [field], [solver] and [run] sections.
    config: PathBuf,
    /// Overrides run.output.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("MAGFLOW_THREADS") {
        match n.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = magflow::exec::set_worker_threads(n) {
                    eprintln!("error: MAGFLOW_THREADS: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: MAGFLOW_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    let mut cfg = match config::load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(out) = cli.output {
        cfg.output = std::env::current_dir().map(|d| d.join(&out)).unwrap_or(out);
    }
    match run::execute(&cfg, cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
