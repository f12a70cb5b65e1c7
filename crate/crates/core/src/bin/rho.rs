use std::process::ExitCode;

use clap::Parser;
use rho_core::cli::{execute, Cli};

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rho: {e}");
            ExitCode::FAILURE
        }
    }
}
