mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::error::{CliError, CliResult};

/// Sizes the global worker pool from `CC_PAD_THREADS`.
fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("CC_PAD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::input(format!("CC_PAD_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::input(e.to_string()))
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("ccpad: {e}");
    e.exit_code()
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    if let Err(e) = init_threads() {
        return fail(e);
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
