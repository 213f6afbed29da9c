use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match vlf_cli::run(vlf_cli::Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
