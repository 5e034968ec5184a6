mod args;
mod commands;
mod document;
mod error;
mod io;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Density(a) => commands::density(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::SelectG(a) => commands::select_g(&a),
        Command::Compound(a) => commands::compound(&a),
        Command::Modes(a) => {
            let k = commands::modes(&a)?;
            eprintln!("modes: {k}");
            Ok(())
        }
        Command::Crp(a) => {
            let (mean, expected) = commands::crp(&a)?;
            eprintln!("expected clusters: {expected}");
            eprintln!("empirical mean: {mean}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 2 through clap.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("finmix: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
