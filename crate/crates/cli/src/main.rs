use std::process::ExitCode;

use clap::Parser;
use prioembed_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prioembed: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
