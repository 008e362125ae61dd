mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(sqphase::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<sqphase::Error> for CliError {
    fn from(e: sqphase::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_cap_or_hypothesis() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sqphase: {e}");
            if let CliError::Core(sqphase::Error::CapExceeded { .. }) = e {
                eprintln!("hint: lower d or s*, or raise --cap if the enumeration fits in memory");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
