mod args;
mod commands;
mod format;

use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use throttlab::Error;

use args::{Cli, Command};

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::InvalidConfig(_) | Error::Precondition(_) | Error::Csv(_) => 2,
        Error::TooLarge(_) => 3,
        Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Toy { which } => commands::toy(which, &mut out),
        Command::Oracle(a) => commands::oracle(a, &mut out),
        Command::Simulate(a) => commands::simulate(a, &mut out),
        Command::Report { csv } => commands::report(csv, &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
