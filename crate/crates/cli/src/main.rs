//! `mobpat` command-line entry point.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use log::LevelFilter;

use args::{Cli, Command};
use output::Failure;

fn init_logging() {
    let (level, unknown) = match std::env::var("MOBPAT_LOG").ok().as_deref() {
        None | Some("info") => (LevelFilter::Info, None),
        Some("quiet") => (LevelFilter::Off, None),
        Some("debug") => (LevelFilter::Debug, None),
        Some(other) => (LevelFilter::Info, Some(other.to_string())),
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(v) = unknown {
        log::warn!("MOBPAT_LOG={v} not recognised (quiet, info, debug); using info");
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a, seed),
        Command::Synth(a) => commands::synth(a, seed),
        Command::Matrices(a) => commands::matrices(a, seed),
        Command::Cluster(a) => commands::cluster(a, seed),
        Command::Predict(a) => commands::predict(a, seed),
        Command::Evaluate(a) => commands::evaluate(a, seed),
        Command::Render(a) => commands::render(a, seed),
        Command::Replay(a) => commands::replay(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    init_logging();
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mobpat {name}: error: {:#}", f.error());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
