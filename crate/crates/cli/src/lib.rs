//! Command-line workflows around the `phmm` library: simulate, fit,
//! benchmark, predict and report.

use std::ffi::OsString;

use clap::Parser;
use phmm::io::Metadata;

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
mod output;

pub use error::{CliError, Result};

/// Package version plus the `git describe` of the build tree.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("PHMM_GIT_DESCRIBE"), ")");

/// Per-invocation settings shared by the commands.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: String,
    /// Arguments after the subcommand, config entries included.
    pub flags: String,
    pub seed: u64,
    pub threads: usize,
}

impl Invocation {
    /// Header lines written above every table.
    pub fn metadata(&self) -> Metadata {
        Metadata::new().with("version", VERSION).with("command", &self.command).with("seed", self.seed).with("flags", &self.flags)
    }

    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::json!({
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            "flags": self.flags,
        })
    }
}

/// Worker count: the requested value or all cores, capped by `PHMM_THREADS`.
pub fn worker_count(requested: Option<usize>) -> Result<usize> {
    let cap = match std::env::var("PHMM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => return Err(CliError::usage(format!("PHMM_THREADS={v} is not a positive integer"))),
        },
        Err(_) => None,
    };
    let base = match requested {
        Some(0) => return Err(CliError::usage("--threads must be positive")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, usize::from),
    };
    Ok(cap.map_or(base, |c| base.min(c)))
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    match try_run(argv) {
        Ok(()) => 0,
        Err(RunError::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(RunError::Cli(e)) => {
            eprintln!("phmm: {e}");
            e.exit_code()
        }
    }
}

enum RunError {
    Clap(clap::Error),
    Cli(CliError),
}

impl From<CliError> for RunError {
    fn from(e: CliError) -> Self {
        RunError::Cli(e)
    }
}

fn try_run(argv: Vec<OsString>) -> std::result::Result<(), RunError> {
    let argv = config::expand(argv)?;
    let cli = args::Cli::try_parse_from(&argv).map_err(RunError::Clap)?;
    let command = argv.get(1).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let flags = argv.iter().skip(2).map(|s| s.to_string_lossy()).collect::<Vec<_>>().join(" ");
    commands::dispatch(cli.command, command, flags).map_err(RunError::from)
}
