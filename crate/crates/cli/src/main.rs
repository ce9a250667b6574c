use std::process::ExitCode;

use clap::Parser;
use otpool::cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match otpool::commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
