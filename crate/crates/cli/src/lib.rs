//! Command-line front end for the sparse stochastic zeroth-order library.
//!
//! The binary exposes four subcommands:
//! - `run`: execute seeded optimization runs from a flat key=value config,
//!   writing per-seed metrics CSVs, final checkpoints, a gradient histogram,
//!   and a resolved-config manifest that reproduces the run byte-for-byte.
//! - `compare`: run several optimizer variants on shared seeds and write a
//!   wide CSV aligned on the step column, with smoothed (EMA) columns and,
//!   for multiple seeds, mean/stddev aggregation.
//! - `verify-theory`: Monte-Carlo and closed-form checks of the moment
//!   identities, estimator unbiasedness, the gradient-recovery bound, and
//!   the convergence-bound arithmetic, written to `theory_report.csv`.
//! - `plot`: render columns of a metrics CSV as a self-contained SVG line
//!   chart.
//!
//! Exit codes: 0 success; 1 I/O failure; 2 invalid configuration or
//! malformed input file; 3 numeric failure during a run (a failure
//! checkpoint is written and named); 4 theory-check violation.

use std::fmt;
use std::path::PathBuf;

pub mod commands;
pub mod config;
pub mod csvio;
pub mod svg;

/// Process exit code for I/O failures.
pub const EXIT_IO: i32 = 1;
/// Process exit code for configuration / input-format errors.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit code for numeric failures (divergence, non-finite loss).
pub const EXIT_NUMERIC: i32 = 3;
/// Process exit code for failed theory checks.
pub const EXIT_THEORY: i32 = 4;

/// Everything a subcommand can fail with, mapped onto the exit codes above.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or malformed input: unknown key, unparsable value,
    /// missing CSV column, empty CSV body. Exit code 2.
    Config(String),
    /// A run produced a non-finite value or otherwise failed numerically.
    /// Carries the path of the failure checkpoint when one was written.
    /// Exit code 3.
    Numeric { message: String, checkpoint: Option<PathBuf> },
    /// One or more theory checks failed; each entry describes one failing
    /// check. Exit code 4.
    Theory(Vec<String>),
    /// Filesystem failure outside the user's control. Exit code 1.
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric { .. } => EXIT_NUMERIC,
            CliError::Theory(_) => EXIT_THEORY,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    /// Wraps an I/O error with the path or action it concerned.
    pub fn io(context: impl Into<String>, source: std::io::Error) -> CliError {
        CliError::Io { context: context.into(), source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numeric { message, checkpoint } => {
                write!(f, "numeric failure: {message}")?;
                if let Some(path) = checkpoint {
                    write!(f, " (failure checkpoint: {})", path.display())?;
                }
                Ok(())
            }
            CliError::Theory(failures) => {
                write!(f, "{} theory check(s) failed:", failures.len())?;
                for failure in failures {
                    write!(f, "\n  - {failure}")?;
                }
                Ok(())
            }
            CliError::Io { context, source } => write!(f, "i/o error: {context}: {source}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
