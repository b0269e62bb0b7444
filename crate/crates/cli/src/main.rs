//! `proptrack`: batch frontend for the propagation and association heads.

mod args;
mod eval;
mod input;
mod synth;
mod tasks;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure classes, mapped to exit codes 1 (bad input) and 2 (runtime).
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<proptrack::Error> for Failure {
    fn from(e: proptrack::Error) -> Self {
        use proptrack::Error as E;
        match e {
            E::Format(_) | E::Io { .. } | E::Image { .. } | E::Config(_) | E::Dimension(_) => {
                Failure::Input(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn input_error(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn run(argv: impl IntoIterator<Item = OsString>) -> CliResult<()> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(input_error(e.render().to_string().trim_end()));
        }
    };
    let settings = args::Settings::load(&cli)?;
    match &cli.command {
        Command::Sot(a) => tasks::sot(a, &settings),
        Command::Vos(a) => tasks::vos(a, &settings),
        Command::Poseprop(a) => tasks::poseprop(a, &settings),
        Command::Mot(a) => tasks::mot(a, &settings),
        Command::Mots(a) => tasks::mots(a, &settings),
        Command::Posetrack(a) => tasks::posetrack(a, &settings),
        Command::Synth(a) => synth::run(a),
        Command::Eval(a) => eval::run(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("proptrack: {e}");
            ExitCode::from(e.code())
        }
    }
}
