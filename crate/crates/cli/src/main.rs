use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match uqkit_cli::run(uqkit_cli::Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
