//! `szo`: experiment harness for sparse stochastic zeroth-order
//! optimization. See `szo --help` and the subcommand help texts; all
//! behavior lives in the library crate so it can be tested in-process.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use szo_cli::commands::{
    cmd_compare, cmd_plot, cmd_run, cmd_verify_theory, CompareArgs, PlotArgs, RunArgs, VerifyArgs,
};

#[derive(Parser)]
#[command(
    name = "szo",
    version,
    about = "Sparse stochastic zeroth-order optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded optimization runs from a flat key=value config file,
    /// writing per-seed metrics CSVs, checkpoints, a gradient histogram,
    /// and a reproducible manifest.
    Run {
        /// Config file; omitted means all defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override one config key, e.g. --set mu=0.1 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run several optimizer variants on shared seeds and write a wide
    /// comparison CSV aligned on steps.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Comma-separated variant tokens (dense, freezeL1, freezeRand,
        /// pruneL1, pruneRand); default is all five.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
    },
    /// Monte-Carlo and closed-form checks of the estimator's moment
    /// identities, unbiasedness, and bound arithmetic; writes
    /// theory_report.csv.
    VerifyTheory {
        /// Monte-Carlo samples per check.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Also report the known counterexample where the recovery
        /// inequality fails (mask misaligned with the gradient support).
        #[arg(long)]
        show_counterexample: bool,
        /// Output directory for the report.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Master seed of the verification streams.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Render columns of a metrics CSV as a self-contained SVG line chart.
    Plot {
        /// Input CSV (as written by `run` or `compare`).
        #[arg(long)]
        csv: PathBuf,
        /// Comma-separated column names to draw against `step`.
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        /// Add a secondary top axis labeling steps with the sparsity
        /// column.
        #[arg(long)]
        sparsity_axis: bool,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out, set } => cmd_run(&RunArgs { config, seed, out, set }),
        Command::Compare { config, seed, out, set, variants } => {
            cmd_compare(&CompareArgs { config, seed, out, set, variants })
        }
        Command::VerifyTheory { samples, show_counterexample, out, seed } => {
            cmd_verify_theory(&VerifyArgs { samples, show_counterexample, out, seed })
        }
        Command::Plot { csv, columns, out, sparsity_axis } => {
            cmd_plot(&PlotArgs { csv, columns, out, sparsity_axis })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("szo: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
