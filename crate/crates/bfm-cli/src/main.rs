mod args;
mod commands;
mod error;
mod output;

use clap::{CommandFactory, FromArgMatches};

use args::{expand_config, resolved_flags, Cli};
use error::CliError;

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let argv = expand_config(argv)?;
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            std::process::exit(e.exit_code());
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let flags = resolved_flags(&matches, cli.command.name());
    commands::dispatch(cli.command, flags)
}

fn main() {
    let argv: Vec<String> = std::env::args_os().map(|a| a.to_string_lossy().into_owned()).collect();
    if let Err(e) = run(argv) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
