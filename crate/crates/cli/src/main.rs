use std::process::ExitCode;

use accel_msm_cli::{error_line, run, RunConfig};
use clap::Parser;

fn main() -> ExitCode {
    let config = RunConfig::parse();
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_line(config.command.name(), &err));
            ExitCode::FAILURE
        }
    }
}
