use std::process::ExitCode;

use boostfield::cli::{exit_status, Cli, EXIT_USAGE};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.into_config().and_then(|cfg| boostfield::cli::run(&cfg));
    match &result {
        Ok(outcome) => print!("{}", outcome.stdout),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(u8::try_from(exit_status(&result)).unwrap_or(EXIT_USAGE as u8))
}
