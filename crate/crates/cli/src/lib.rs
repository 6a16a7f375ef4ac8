//! Command-line front end for `expstat`.
//!
//! `curve` evaluates a density or distribution function on a grid. `sample`
//! draws seeded Monte Carlo values. `check` runs the verification suite on a
//! rate vector.
//!
//! Exit status is 2 on a usage error. Otherwise it is 1 when a check fails
//! or a computation errors, and 0 on success.

use std::ffi::OsString;
use std::io::{self, Write};

use clap::Parser;

pub mod args;
pub mod check;
pub mod curve;
pub mod format;

pub use args::{Cli, Command};
pub use check::{run_checks, CheckReport};
pub use curve::CurveRequest;
pub use format::format_g17;

pub const EXIT_SUCCESS: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] expstat::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

/// Executes a parsed command. Returns the exit status on success, which is
/// non-zero only when `check` finds a failure.
pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<u8, CliError> {
    match &cli.command {
        Command::Curve(a) => curve::cmd_curve(a, out).map(|()| EXIT_SUCCESS),
        Command::Sample(a) => curve::cmd_sample(a, out).map(|()| EXIT_SUCCESS),
        Command::Check(a) => {
            let report = run_checks(&a.rates, a.seed, a.samples);
            report.write_to(out)?;
            Ok(if report.passed() {
                EXIT_SUCCESS
            } else {
                EXIT_FAILURE
            })
        }
    }
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `out` and diagnostics to `err`.
pub fn main_with<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{text}");
            return EXIT_SUCCESS;
        }
    };
    let status = run(&cli, out).and_then(|code| {
        out.flush()?;
        Ok(code)
    });
    match status {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
