//! `faframe` command-line tool.
//!
//! Exit codes: 0 success, 2 success with degenerate-frame warnings, 10 usage
//! errors, 11 unreadable or malformed input, 12 failures while running, 13 a
//! gradient check that did not pass.

mod args;
mod commands;
mod report;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use args::{AuditArgs, BenchArgs, BenchFamily, CanonicalizeArgs, Cli, Command, GradcheckArgs};
pub use commands::{cmd_audit, cmd_bench, cmd_canonicalize, cmd_gradcheck, Outcome};
pub use report::{config_hash, to_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_USAGE: i32 = 10;
pub const EXIT_INPUT: i32 = 11;
pub const EXIT_RUNTIME: i32 = 12;
pub const EXIT_CHECK_FAILED: i32 = 13;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] faframe::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use faframe::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_INPUT,
            CliError::Core(E::Parse { .. } | E::Io(_) | E::Json(_) | E::UnknownElement(_) | E::InvalidSystem(_)) => EXIT_INPUT,
            CliError::Core(E::InvalidConfig(_) | E::UnknownStrategy(_) | E::DegenerateAngle { .. }) => EXIT_USAGE,
            CliError::Core(_) => EXIT_RUNTIME,
        }
    }
}

/// Parse `args` and run the selected command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Canonicalize(a) => cmd_canonicalize(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(outcome.stdout.as_bytes());
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
