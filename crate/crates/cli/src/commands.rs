//! Subcommand implementations.
//!
//! Each command takes a plain argument struct (so tests drive them without
//! a process boundary) and returns `Result<(), CliError>`; the binary maps
//! the error onto its exit code. All file output goes under the configured
//! output directory, which is created on demand.

use std::fs;
use std::path::{Path, PathBuf};

use szo_core::estimators::EstimatorKind;
use szo_core::mask::Mask;
use szo_core::metrics::{ema, grad_histogram};
use szo_core::objectives::{sparse_quadratic_objective, Batch, Objective};
use szo_core::optimizer::{
    checkpoint_save, run, theory_lr, OptState, RunFailure, RunOutput, Variant,
};
use szo_core::rng::{RngStream, VERIFY_BASE};
use szo_core::theorylab::{
    check_gradient_recovery, convergence_bound, mc_norm_moment, mc_unbiasedness,
};

use crate::config::ExperimentConfig;
use crate::csvio::{fmt_f64, fmt_opt, parse_numeric_csv, run_csv, table_csv};
use crate::svg::{render_chart, Chart, Series, TopAxis};
use crate::CliError;

/// Smoothing factor of the EMA columns in compare CSVs.
pub const EMA_FACTOR: f64 = 0.99;
/// Bins in the final-gradient histogram written by `run`.
pub const GRAD_HIST_BINS: usize = 20;
/// Below this many Monte-Carlo samples, verify-theory reports `warn`
/// instead of pass/fail: the standard errors are too noisy to judge.
pub const LOW_SAMPLES: usize = 1000;

/// Arguments of `szo run`.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub set: Vec<String>,
}

/// Arguments of `szo compare`.
#[derive(Debug, Clone, Default)]
pub struct CompareArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub set: Vec<String>,
    /// Variant tokens; empty means all five.
    pub variants: Vec<String>,
}

/// Arguments of `szo verify-theory`.
#[derive(Debug, Clone)]
pub struct VerifyArgs {
    pub samples: usize,
    pub show_counterexample: bool,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for VerifyArgs {
    fn default() -> VerifyArgs {
        VerifyArgs {
            samples: 100_000,
            show_counterexample: false,
            out: PathBuf::from("runs"),
            seed: 1,
        }
    }
}

/// Arguments of `szo plot`.
#[derive(Debug, Clone, Default)]
pub struct PlotArgs {
    pub csv: PathBuf,
    pub columns: Vec<String>,
    pub out: PathBuf,
    pub sparsity_axis: bool,
}

/// Reads the config file (when given) and resolves the full configuration.
fn resolve_config(
    config_path: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<ExperimentConfig, CliError> {
    let text = match config_path {
        Some(path) => Some(fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?),
        None => None,
    };
    ExperimentConfig::from_sources(text.as_deref(), sets, seed, out)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("creating output directory {}", dir.display()), e))
}

/// The batch used for whole-run summary diagnostics: the full training
/// split when a dataset exists, the empty batch otherwise.
fn summary_batch(objective: &dyn Objective) -> Batch {
    match objective.dataset() {
        Some(data) => Batch::new(data.train().to_vec()),
        None => Batch::empty(),
    }
}

/// Writes the final-gradient histogram for a completed run. Histogram
/// failures (e.g. a non-finite gradient at an otherwise finite endpoint)
/// are logged and skipped rather than failing the run.
fn write_grad_hist(objective: &dyn Objective, state: &OptState, path: &Path) -> Result<(), CliError> {
    let grad = match objective.true_grad(&state.w, &summary_batch(objective)) {
        Ok(grad) => grad,
        Err(e) => {
            log::warn!("skipping gradient histogram: {e}");
            return Ok(());
        }
    };
    match grad_histogram(&grad, GRAD_HIST_BINS) {
        Ok(hist) => write_text(path, &crate::csvio::grad_hist_csv(&hist)),
        Err(e) => {
            log::warn!("skipping gradient histogram: {e}");
            Ok(())
        }
    }
}

/// Flushes a failed run: partial rows to the run CSV, state to a failure
/// checkpoint. Returns the numeric error carrying the checkpoint path.
fn flush_failure(
    failure: &RunFailure,
    csv_path: &Path,
    checkpoint_path: &Path,
) -> CliError {
    if let Err(e) = write_text(csv_path, &run_csv(&failure.partial)) {
        log::warn!("could not flush partial rows: {e}");
    }
    let checkpoint = match checkpoint_save(&failure.state, checkpoint_path) {
        Ok(()) => Some(checkpoint_path.to_path_buf()),
        Err(e) => {
            log::warn!("could not write failure checkpoint: {e}");
            None
        }
    };
    CliError::Numeric { message: failure.to_string(), checkpoint }
}

/// `szo run`: seeded runs of one configuration. Writes, per seed,
/// `run_<seed>.csv`, `final_checkpoint_<seed>.bin`, and
/// `grad_hist_<seed>.csv`, plus a single `manifest.txt` with the resolved
/// configuration. Stops at the first numeric failure, flushing partial
/// rows and a failure checkpoint.
pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let config = resolve_config(
        args.config.as_deref(),
        &args.set,
        args.seed,
        args.out.as_deref(),
    )?;
    let objective = config.build_objective()?;
    create_out_dir(&config.out)?;
    write_text(
        &config.out.join("manifest.txt"),
        &config.manifest(&objective.id()),
    )?;
    for &seed in &config.seeds {
        let opt = config.opt_config(objective.as_ref(), seed)?;
        let csv_path = config.out.join(format!("run_{seed}.csv"));
        match run(&opt, objective.as_ref()) {
            Ok(RunOutput { record, state }) => {
                write_text(&csv_path, &run_csv(&record))?;
                let checkpoint_path = config.out.join(format!("final_checkpoint_{seed}.bin"));
                checkpoint_save(&state, &checkpoint_path).map_err(|e| {
                    CliError::io(format!("writing {}", checkpoint_path.display()), match e {
                        szo_core::SzoError::Io(io) => io,
                        other => std::io::Error::other(other.to_string()),
                    })
                })?;
                write_grad_hist(
                    objective.as_ref(),
                    &state,
                    &config.out.join(format!("grad_hist_{seed}.csv")),
                )?;
                let last = record.rows.last();
                println!(
                    "seed {seed}: {} rows, final train_loss {}, sparsity {} -> {}",
                    record.rows.len(),
                    last.map_or_else(String::new, |r| fmt_f64(r.train_loss)),
                    last.map_or_else(String::new, |r| fmt_f64(r.sparsity)),
                    csv_path.display()
                );
            }
            Err(failure) => {
                let checkpoint_path = config.out.join(format!("failed_checkpoint_{seed}.bin"));
                return Err(flush_failure(&failure, &csv_path, &checkpoint_path));
            }
        }
    }
    Ok(())
}

/// Per-metric column collection for the compare CSV.
struct MetricSpec {
    name: &'static str,
    /// Whether an EMA column is emitted (only for metrics present on every
    /// step row).
    smoothed: bool,
    extract: fn(&szo_core::metrics::MetricsRow) -> Option<f64>,
}

const COMPARE_METRICS: [MetricSpec; 5] = [
    MetricSpec { name: "train_loss", smoothed: true, extract: |r| Some(r.train_loss) },
    MetricSpec { name: "cum_loss", smoothed: false, extract: |r| Some(r.cum_loss) },
    MetricSpec { name: "grad_dist", smoothed: true, extract: |r| r.grad_dist },
    MetricSpec { name: "sparsity", smoothed: false, extract: |r| Some(r.sparsity) },
    MetricSpec { name: "test_acc", smoothed: false, extract: |r| r.test_acc },
];

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `szo compare`: runs ≥2 variants over shared seeds and data, writing
/// per-run CSVs plus a wide `compare.csv` aligned on the step column, with
/// EMA(0.99) smoothing columns and, for multiple seeds, mean/stddev
/// aggregation. A variant with any failed seed keeps its per-run outputs
/// but is excluded from the wide CSV; the command then exits nonzero.
pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let tokens: Vec<String> = if args.variants.is_empty() {
        Variant::ALL.iter().map(|v| v.token().to_string()).collect()
    } else {
        args.variants.clone()
    };
    let mut variants: Vec<Variant> = Vec::new();
    for token in &tokens {
        let variant = Variant::from_token(token)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !variants.contains(&variant) {
            variants.push(variant);
        }
    }
    if variants.len() < 2 {
        return Err(CliError::Config(format!(
            "compare needs at least 2 distinct variants, got {}",
            variants.len()
        )));
    }

    let config = resolve_config(
        args.config.as_deref(),
        &args.set,
        args.seed,
        args.out.as_deref(),
    )?;
    let objective = config.build_objective()?;
    create_out_dir(&config.out)?;
    let mut manifest = config.manifest(&objective.id());
    manifest.push_str(&format!(
        "# compare variants: {}\n",
        variants.iter().map(|v| v.token()).collect::<Vec<_>>().join(",")
    ));
    write_text(&config.out.join("manifest.txt"), &manifest)?;

    // All runs, writing per-run artifacts as they complete.
    let mut completed: Vec<(Variant, Vec<RunOutput>)> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let mut first_checkpoint: Option<PathBuf> = None;
    for &variant in &variants {
        let mut outputs = Vec::new();
        let mut variant_ok = true;
        for &seed in &config.seeds {
            let mut per_run = config.clone();
            per_run.variant = variant;
            let opt = per_run.opt_config(objective.as_ref(), seed)?;
            let csv_path = config.out.join(format!("run_{}_{seed}.csv", variant.token()));
            match run(&opt, objective.as_ref()) {
                Ok(output) => {
                    write_text(&csv_path, &run_csv(&output.record))?;
                    outputs.push(output);
                }
                Err(failure) => {
                    variant_ok = false;
                    let checkpoint_path = config
                        .out
                        .join(format!("failed_checkpoint_{}_{seed}.bin", variant.token()));
                    let err = flush_failure(&failure, &csv_path, &checkpoint_path);
                    if first_checkpoint.is_none() {
                        if let CliError::Numeric { checkpoint: Some(p), .. } = &err {
                            first_checkpoint = Some(p.clone());
                        }
                    }
                    failures.push(format!("{} seed {seed}: {failure}", variant.token()));
                }
            }
        }
        if variant_ok {
            completed.push((variant, outputs));
        }
    }

    // Wide CSV over the variants whose every seed completed.
    let multi_seed = config.seeds.len() > 1;
    let steps: Vec<u64> = completed
        .first()
        .map(|(_, outputs)| outputs[0].record.rows.iter().map(|r| r.step).collect())
        .unwrap_or_default();
    let mut header = vec!["step".to_string()];
    for metric in &COMPARE_METRICS {
        for (variant, _) in &completed {
            header.push(format!("{}_{}", metric.name, variant.token()));
            if multi_seed {
                header.push(format!("std_{}_{}", metric.name, variant.token()));
            }
        }
    }
    for metric in COMPARE_METRICS.iter().filter(|m| m.smoothed) {
        for (variant, _) in &completed {
            header.push(format!("ema_{}_{}", metric.name, variant.token()));
        }
    }

    // Column values keyed off the row index (steps are shared across runs
    // of one compare invocation).
    let mut columns: Vec<Vec<Option<f64>>> = Vec::new();
    for metric in &COMPARE_METRICS {
        for (_, outputs) in &completed {
            let mut mean_col = Vec::with_capacity(steps.len());
            let mut std_col = Vec::with_capacity(steps.len());
            for i in 0..steps.len() {
                let values: Vec<f64> = outputs
                    .iter()
                    .filter_map(|o| o.record.rows.get(i).and_then(|r| (metric.extract)(r)))
                    .collect();
                if values.len() == outputs.len() {
                    mean_col.push(Some(values.iter().sum::<f64>() / values.len() as f64));
                    std_col.push(if multi_seed { Some(sample_std(&values)) } else { None });
                } else {
                    mean_col.push(None);
                    std_col.push(None);
                }
            }
            columns.push(mean_col);
            if multi_seed {
                columns.push(std_col);
            }
        }
    }
    for metric in COMPARE_METRICS.iter().filter(|m| m.smoothed) {
        for (_, outputs) in &completed {
            // Recompute the per-step mean, then smooth it. EMA columns are
            // only emitted for metrics present on every step row.
            let mut means = Vec::with_capacity(steps.len());
            for i in 0..steps.len() {
                let values: Vec<f64> = outputs
                    .iter()
                    .filter_map(|o| o.record.rows.get(i).and_then(|r| (metric.extract)(r)))
                    .collect();
                means.push(if values.len() == outputs.len() {
                    Some(values.iter().sum::<f64>() / values.len() as f64)
                } else {
                    None
                });
            }
            let present: Vec<f64> = means.iter().copied().flatten().collect();
            if present.len() == means.len() && !present.is_empty() {
                let smooth = ema(&present, EMA_FACTOR);
                columns.push(smooth.into_iter().map(Some).collect());
            } else {
                columns.push(vec![None; steps.len()]);
            }
        }
    }

    let rows: Vec<Vec<String>> = steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let mut row = vec![step.to_string()];
            row.extend(columns.iter().map(|col| fmt_opt(col[i])));
            row
        })
        .collect();
    let compare_path = config.out.join("compare.csv");
    write_text(&compare_path, &table_csv(&header, &rows))?;
    println!(
        "compared {} variant(s) over {} seed(s) -> {}",
        completed.len(),
        config.seeds.len(),
        compare_path.display()
    );

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric {
            message: format!(
                "{} run(s) failed; completed outputs kept: {}",
                failures.len(),
                failures.join("; ")
            ),
            checkpoint: first_checkpoint,
        })
    }
}

/// One line of the theory report.
struct ReportRow {
    check: &'static str,
    detail: String,
    samples: Option<usize>,
    estimate: Option<f64>,
    expected: Option<f64>,
    bound: Option<f64>,
    std_error: Option<f64>,
    verdict: &'static str,
}

impl ReportRow {
    fn csv_cells(&self) -> Vec<String> {
        vec![
            self.check.to_string(),
            self.detail.clone(),
            self.samples.map_or_else(String::new, |s| s.to_string()),
            fmt_opt(self.estimate),
            fmt_opt(self.expected),
            fmt_opt(self.bound),
            fmt_opt(self.std_error),
            self.verdict.to_string(),
        ]
    }
}

/// `szo verify-theory`: Monte-Carlo and closed-form checks of the moment
/// identity and bound, estimator unbiasedness, the gradient-recovery
/// inequality, and the step-size/convergence-bound arithmetic. Writes
/// `theory_report.csv` and exits 4 listing any failed check. With fewer
/// than [`LOW_SAMPLES`] samples the Monte-Carlo rows degrade to `warn`
/// verdicts (standard errors too large to judge) without failing. The
/// optional counterexample row shows the recovery inequality breaking for
/// a mask that excludes the gradient support; it is reported for
/// illustration and never counted as a failure.
pub fn cmd_verify_theory(args: &VerifyArgs) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Config("--samples must be at least 1".into()));
    }
    let low = args.samples < LOW_SAMPLES;
    if low {
        eprintln!(
            "warning: --samples {} is below {LOW_SAMPLES}; standard errors are unreliable \
             and Monte-Carlo checks report 'warn' instead of pass/fail",
            args.samples
        );
    }
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut stream_id = VERIFY_BASE;
    let mut next_stream = |seed: u64| {
        stream_id += 1;
        RngStream::new(seed, stream_id)
    };
    let numeric = |e: szo_core::SzoError| CliError::Numeric { message: e.to_string(), checkpoint: None };

    // Second-moment identity: E‖ū‖² = n̄ within 2%.
    for nbar in [10usize, 50, 100] {
        let mask = Mask::from_indices(100, 0..nbar).map_err(numeric)?;
        let report = mc_norm_moment(100, &mask, 2.0, args.samples, &next_stream(args.seed))
            .map_err(numeric)?;
        let expected = nbar as f64;
        let pass = (report.estimate - expected).abs() < 0.02 * expected;
        rows.push(ReportRow {
            check: "moment_identity",
            detail: format!("p=2 n=100 nbar={nbar}"),
            samples: Some(args.samples),
            estimate: Some(report.estimate),
            expected: Some(expected),
            bound: Some(report.bound),
            std_error: Some(report.standard_error),
            verdict: if low {
                "warn"
            } else if pass {
                "pass"
            } else {
                "fail"
            },
        });
    }

    // Moment bound (n̄+p)^{p/2}; the even orders also have closed forms.
    for p in [3.0f64, 4.0, 6.0] {
        for nbar in [1usize, 10, 50] {
            let mask = Mask::from_indices(50, 0..nbar).map_err(numeric)?;
            let report = mc_norm_moment(50, &mask, p, args.samples, &next_stream(args.seed))
                .map_err(numeric)?;
            rows.push(ReportRow {
                check: "moment_bound",
                detail: format!("p={p} n=50 nbar={nbar}"),
                samples: Some(args.samples),
                estimate: Some(report.estimate),
                expected: None,
                bound: Some(report.bound),
                std_error: Some(report.standard_error),
                verdict: if low {
                    "warn"
                } else if report.violation {
                    "fail"
                } else {
                    "pass"
                },
            });
            if p == 4.0 {
                // Same estimate against the exact fourth moment n̄(n̄+2).
                let exact = (nbar * (nbar + 2)) as f64;
                let pass = (report.estimate - exact).abs() <= 3.0 * report.standard_error;
                rows.push(ReportRow {
                    check: "moment_exact",
                    detail: format!("p=4 n=50 nbar={nbar}"),
                    samples: Some(args.samples),
                    estimate: Some(report.estimate),
                    expected: Some(exact),
                    bound: Some(report.bound),
                    std_error: Some(report.standard_error),
                    verdict: if low {
                        "warn"
                    } else if pass {
                        "pass"
                    } else {
                        "fail"
                    },
                });
            }
        }
    }

    // Unbiasedness of the difference estimators on a quadratic.
    let active: Vec<usize> = (0..20).collect();
    let quad = sparse_quadratic_objective(20, &active, 1.0).map_err(numeric)?;
    let w = quad.init_params(&mut next_stream(args.seed));
    let half_mask = Mask::from_indices(20, (0..20).step_by(2)).map_err(numeric)?;
    for kind in [EstimatorKind::TwoPoint, EstimatorKind::TwoSided] {
        let report = mc_unbiasedness(
            &quad,
            &w,
            &half_mask,
            0.05,
            kind,
            args.samples,
            &next_stream(args.seed),
        )
        .map_err(numeric)?;
        let pass = report.max_deviation_se < 5.0;
        rows.push(ReportRow {
            check: "unbiasedness",
            detail: format!("{kind:?} quadratic n=20 nbar=10 mu=0.05"),
            samples: Some(args.samples),
            estimate: Some(report.max_deviation_se),
            expected: Some(0.0),
            bound: Some(5.0),
            std_error: None,
            verdict: if low {
                "warn"
            } else if pass {
                "pass"
            } else {
                "fail"
            },
        });
    }

    // Gradient recovery: holds for the full mask and for a mask covering
    // the gradient support; a mask that misses the support violates it.
    let support: Vec<usize> = (0..6).collect();
    let sparse = sparse_quadratic_objective(30, &support, 1.0).map_err(numeric)?;
    let ws = sparse.init_params(&mut next_stream(args.seed));
    let recovery_cases: Vec<(&str, Mask, f64, bool)> = vec![
        ("full mask mu=0.05", Mask::all_ones(30), 0.05, true),
        (
            "aligned mask mu=1e-6",
            Mask::from_indices(30, 0..6).map_err(numeric)?,
            1e-6,
            true,
        ),
    ];
    for (detail, mask, mu, expect_hold) in recovery_cases {
        let check = check_gradient_recovery(&sparse, &ws, &mask, mu, 1.0).map_err(numeric)?;
        rows.push(ReportRow {
            check: "grad_recovery",
            detail: detail.to_string(),
            samples: None,
            estimate: Some(check.lhs),
            expected: None,
            bound: Some(check.rhs),
            std_error: None,
            verdict: if check.holds == expect_hold { "pass" } else { "fail" },
        });
    }
    if args.show_counterexample {
        let misaligned = Mask::from_indices(30, 10..16).map_err(numeric)?;
        let check =
            check_gradient_recovery(&sparse, &ws, &misaligned, 1e-6, 1.0).map_err(numeric)?;
        rows.push(ReportRow {
            check: "grad_recovery",
            detail: "counterexample: mask misses the gradient support".to_string(),
            samples: None,
            estimate: Some(check.lhs),
            expected: None,
            bound: Some(check.rhs),
            std_error: None,
            verdict: "counterexample",
        });
    }

    // Step-size arithmetic: exact rational value.
    let lr = theory_lr(4, 1.0).map_err(numeric)?;
    rows.push(ReportRow {
        check: "step_size",
        detail: "theory_lr(4 1)".to_string(),
        samples: None,
        estimate: Some(lr),
        expected: Some(1.0 / 32.0),
        bound: None,
        std_error: None,
        verdict: if lr == 1.0 / 32.0 { "pass" } else { "fail" },
    });

    // Convergence-bound monotonicity: increasing in n̂, L, μ; decreasing
    // in T.
    let bound_at = |nhat: f64, l: f64, mu: f64, t: u64| convergence_bound(nhat, l, 1.0, t, mu);
    let mono = |label: &'static str,
                values: Vec<f64>,
                increasing: bool|
     -> Result<(usize, usize), CliError> {
        let mut violations = 0;
        for pair in values.windows(2) {
            let ordered = if increasing { pair[1] > pair[0] } else { pair[1] < pair[0] };
            if !ordered {
                violations += 1;
                log::warn!("monotonicity violation in {label}: {} then {}", pair[0], pair[1]);
            }
        }
        Ok((violations, values.len() - 1))
    };
    let grids: Vec<(&'static str, Vec<f64>, bool)> = vec![
        (
            "increasing in nhat",
            [1.0, 2.0, 5.0, 10.0, 50.0, 100.0]
                .iter()
                .map(|&nh| bound_at(nh, 1.0, 0.05, 100))
                .collect::<szo_core::Result<_>>()
                .map_err(numeric)?,
            true,
        ),
        (
            "increasing in L",
            [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
                .iter()
                .map(|&l| bound_at(10.0, l, 0.05, 100))
                .collect::<szo_core::Result<_>>()
                .map_err(numeric)?,
            true,
        ),
        (
            "increasing in mu",
            [0.01, 0.02, 0.05, 0.1, 0.2]
                .iter()
                .map(|&mu| bound_at(10.0, 1.0, mu, 100))
                .collect::<szo_core::Result<_>>()
                .map_err(numeric)?,
            true,
        ),
        (
            "decreasing in T",
            [0u64, 1, 10, 100, 1000, 10_000]
                .iter()
                .map(|&t| bound_at(10.0, 1.0, 0.05, t))
                .collect::<szo_core::Result<_>>()
                .map_err(numeric)?,
            false,
        ),
    ];
    for (label, values, increasing) in grids {
        let (violations, pairs) = mono(label, values, increasing)?;
        rows.push(ReportRow {
            check: "bound_monotone",
            detail: label.to_string(),
            samples: None,
            estimate: Some(violations as f64),
            expected: Some(0.0),
            bound: Some(pairs as f64),
            std_error: None,
            verdict: if violations == 0 { "pass" } else { "fail" },
        });
    }

    // Emit report and stdout summary.
    create_out_dir(&args.out)?;
    let header: Vec<String> =
        ["check", "detail", "samples", "estimate", "expected", "bound", "std_error", "verdict"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let cells: Vec<Vec<String>> = rows.iter().map(ReportRow::csv_cells).collect();
    let report_path = args.out.join("theory_report.csv");
    write_text(&report_path, &table_csv(&header, &cells))?;
    for row in &rows {
        println!("[{}] {} {}", row.verdict, row.check, row.detail);
    }
    println!("report -> {}", report_path.display());

    let failures: Vec<String> = rows
        .iter()
        .filter(|r| r.verdict == "fail")
        .map(|r| format!("{} {}", r.check, r.detail))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Theory(failures))
    }
}

/// `szo plot`: renders chosen columns of a metrics CSV against the step
/// column as a self-contained SVG. `--sparsity-axis` adds a secondary top
/// axis labeling the same step positions with the sparsity column.
pub fn cmd_plot(args: &PlotArgs) -> Result<(), CliError> {
    if args.columns.is_empty() {
        return Err(CliError::Config("plot needs at least one column name".into()));
    }
    let text = fs::read_to_string(&args.csv).map_err(|e| {
        CliError::Config(format!("cannot read csv {}: {e}", args.csv.display()))
    })?;
    let data = parse_numeric_csv(&text)?;
    if data.rows.is_empty() {
        return Err(CliError::Config(format!(
            "csv {} has a header but no data rows",
            args.csv.display()
        )));
    }
    let step_col = data.column("step").ok_or_else(|| {
        CliError::Config(format!(
            "csv {} has no 'step' column (found: {})",
            args.csv.display(),
            data.columns.join(", ")
        ))
    })?;
    let mut series = Vec::new();
    for name in &args.columns {
        let col = data.column(name).ok_or_else(|| {
            CliError::Config(format!(
                "column '{name}' not found in {} (available: {})",
                args.csv.display(),
                data.columns.join(", ")
            ))
        })?;
        let points: Vec<(f64, f64)> = data
            .rows
            .iter()
            .filter_map(|row| match (row[step_col], row[col]) {
                (Some(x), Some(y)) => Some((x, y)),
                _ => None,
            })
            .collect();
        series.push(Series { name: name.clone(), points });
    }
    let top_axis = if args.sparsity_axis {
        let sparsity_col = data.column("sparsity").ok_or_else(|| {
            CliError::Config(format!(
                "--sparsity-axis needs a 'sparsity' column in {}",
                args.csv.display()
            ))
        })?;
        let points: Vec<(f64, f64)> = data
            .rows
            .iter()
            .filter_map(|row| match (row[step_col], row[sparsity_col]) {
                (Some(x), Some(y)) => Some((x, y)),
                _ => None,
            })
            .collect();
        Some(TopAxis { label: "sparsity".to_string(), points })
    } else {
        None
    };
    let title = args
        .csv
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "metrics".to_string());
    let y_label =
        if args.columns.len() <= 2 { args.columns.join(", ") } else { "value".to_string() };
    let chart = Chart {
        title,
        x_label: "step".to_string(),
        y_label,
        series,
        top_axis,
    };
    let svg = render_chart(&chart)?;
    write_text(&args.out, &svg)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
