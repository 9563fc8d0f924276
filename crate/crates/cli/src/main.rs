use std::process::ExitCode;

use clap::Parser;
use noma_sec_cli::{execute, Cli};

fn main() -> ExitCode {
    ExitCode::from(execute(&Cli::parse()))
}
