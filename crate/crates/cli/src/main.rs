//! `microact`: batch front end for recording decomposition.

mod commands;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use commands::{Cli, CliError};

fn main() -> ExitCode {
    let matches = match commands::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => return clap_exit(e),
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return clap_exit(e.with_cmd(&Cli::command())),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {}", e.prefix(), e);
            ExitCode::from(e.exit_code())
        }
    }
}

fn clap_exit(e: clap::Error) -> ExitCode {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            print!("{}", e.render());
            ExitCode::SUCCESS
        }
        _ => {
            let text = e.render().to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprint!("{}: {text}", CliError::USAGE_PREFIX);
            ExitCode::from(1)
        }
    }
}
