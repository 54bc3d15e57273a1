mod args;
mod commands;
mod document;
mod input;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const IO: u8 = 2;
    pub const DEGENERATE: u8 = 3;
    pub const ME_VALIDITY: u8 = 4;
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: exit::USAGE, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure { code: exit::IO, message: message.into() }
    }
}

impl From<snmix::Error> for Failure {
    fn from(e: snmix::Error) -> Self {
        match e {
            snmix::Error::Validity(_) => Failure { code: exit::ME_VALIDITY, message: e.to_string() },
            _ => Failure::usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("snmix: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
