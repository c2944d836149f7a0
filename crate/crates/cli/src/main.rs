//! `ris-stats`: evaluate densities, simulate the channel and validate one
//! against the other. Exit codes: 0 success, 1 invalid input, 2 series
//! non-convergence, 3 validation failure.

mod args;
mod commands;
mod grid;

use std::ffi::OsString;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Parser;
use ris_stats::PdfError;

use args::{Cli, Command};

pub const THREADS_ENV: &str = "RIS_STATS_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NonConverged,
    ValidationFailed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::NonConverged => 2,
            Status::ValidationFailed => 3,
        }
    }
}

/// `--threads` wins over the environment; zero means all cores.
fn thread_count(flag: Option<usize>, env: Option<&str>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match env.map(str::trim) {
        None | Some("") => Ok(0),
        Some(v) => match v.parse() {
            Ok(n) => Ok(n),
            Err(_) => bail!("{THREADS_ENV}={v:?} is not a thread count"),
        },
    }
}

fn execute(cli: Cli) -> Result<Status> {
    let env = std::env::var(THREADS_ENV).ok();
    let threads = thread_count(cli.threads, env.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| match &cli.command {
        Command::Pdf(a) => commands::pdf(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Validate(a) => commands::validate(a),
    })
}

fn failure_code(err: &anyhow::Error) -> u8 {
    let numeric = err.chain().any(|c| c.downcast_ref::<PdfError>().is_some_and(PdfError::is_numeric));
    if numeric {
        2
    } else {
        1
    }
}

/// Parses `argv` and runs it, returning the process exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version land here too
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            failure_code(&e)
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
