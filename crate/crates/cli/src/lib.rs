//! Command-line driver for the flowweld engine.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input contract
//! violation, 3 I/O error.

pub mod cli;
pub mod commands;
pub mod error;
pub mod gradcheck;
pub mod manifest;
pub mod scene_io;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use error::CliError;

/// Caps the worker pool; results do not depend on it.
pub const THREADS_ENV: &str = "FLOWWELD_THREADS";

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match cli::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    let result = thread_pool().and_then(|pool| pool.install(|| commands::execute(cli.command)));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
