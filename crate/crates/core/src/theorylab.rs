//! Statistical and arithmetic verification of the analysis behind the
//! sparse-perturbation estimator: Monte-Carlo checks of the masked-norm
//! moment bound `E‖ū‖^p ≤ (n̄+p)^{p/2}` and of estimator unbiasedness on
//! quadratics, the gradient-norm recovery inequality
//! `‖∇f‖² ≤ 2‖m ⊙ ∇f‖² + (μ²L²/2)(n̄+4)³`, and the closed-form
//! convergence-bound evaluator used by the step-size policy.
//!
//! Monte-Carlo loops run in fixed-size batches, one RNG substream per
//! batch, reduced in ascending batch index — parallel and sequential
//! execution produce bit-identical reports.

use crate::error::{Result, SzoError};
use crate::estimators::{estimate_single, EstimatorKind};
use crate::exec::{map_indexed, map_indexed_seq};
use crate::mask::Mask;
use crate::objectives::{Batch, Objective};
use crate::param::ParamVector;
use crate::rng::RngStream;

const MC_BATCH: usize = 4096;

/// Monte-Carlo estimate of a masked-perturbation norm moment, with the
/// analytic bound it is checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub n: usize,
    pub nbar: usize,
    /// Moment order (≥ 2).
    pub p: f64,
    pub samples: usize,
    pub estimate: f64,
    /// `(n̄ + p)^{p/2}`.
    pub bound: f64,
    pub standard_error: f64,
    /// True iff `estimate − 3·SE > bound`: the bound is rejected beyond
    /// Monte-Carlo noise.
    pub violation: bool,
}

fn batch_layout(samples: usize) -> (usize, usize) {
    let batches = samples.div_ceil(MC_BATCH);
    (batches, MC_BATCH)
}

fn moment_report(
    n: usize,
    m: &Mask,
    p: f64,
    samples: usize,
    partials: Vec<(f64, f64)>,
) -> MomentReport {
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for (s, sq) in partials {
        sum += s;
        sumsq += sq;
    }
    let ns = samples as f64;
    let estimate = sum / ns;
    let variance = (sumsq / ns - estimate * estimate).max(0.0);
    let standard_error = (variance / ns).sqrt();
    let bound = ((m.nbar() as f64) + p).powf(p / 2.0);
    MomentReport {
        n,
        nbar: m.nbar(),
        p,
        samples,
        estimate,
        bound,
        standard_error,
        violation: estimate - 3.0 * standard_error > bound,
    }
}

fn moment_batch(n: usize, m: &Mask, p: f64, count: usize, stream: &mut RngStream) -> (f64, f64) {
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..count {
        let u = stream.sample_std_normal(n);
        let sq: f64 = m.iter().zip(&u).map(|(on, &x)| if on { x * x } else { 0.0 }).sum();
        let value = sq.sqrt().powf(p);
        sum += value;
        sumsq += value * value;
    }
    (sum, sumsq)
}

fn check_moment_args(n: usize, m: &Mask, p: f64, samples: usize) -> Result<()> {
    SzoError::check_len(n, m.len())?;
    if p < 2.0 {
        return Err(SzoError::Domain(format!("moment order must be ≥ 2, got {p}")));
    }
    if samples == 0 {
        return Err(SzoError::Domain("samples must be at least 1".into()));
    }
    Ok(())
}

/// Estimates `E‖m ⊙ u‖^p`, `u ~ N(0, I_n)`, from `samples` draws and checks
/// it against the analytic bound `(n̄+p)^{p/2}`.
pub fn mc_norm_moment(
    n: usize,
    m: &Mask,
    p: f64,
    samples: usize,
    rng: &RngStream,
) -> Result<MomentReport> {
    check_moment_args(n, m, p, samples)?;
    let (batches, per) = batch_layout(samples);
    let partials = map_indexed(batches, |b| {
        let count = per.min(samples - b * per);
        let mut stream = rng.substream(batches as u64, b as u64);
        moment_batch(n, m, p, count, &mut stream)
    });
    Ok(moment_report(n, m, p, samples, partials))
}

/// Always-sequential twin of [`mc_norm_moment`] (bit-identity contract).
pub fn mc_norm_moment_seq(
    n: usize,
    m: &Mask,
    p: f64,
    samples: usize,
    rng: &RngStream,
) -> Result<MomentReport> {
    check_moment_args(n, m, p, samples)?;
    let (batches, per) = batch_layout(samples);
    let partials = map_indexed_seq(batches, |b| {
        let count = per.min(samples - b * per);
        let mut stream = rng.substream(batches as u64, b as u64);
        moment_batch(n, m, p, count, &mut stream)
    });
    Ok(moment_report(n, m, p, samples, partials))
}

/// Per-coordinate comparison of the Monte-Carlo mean of the estimator
/// against its closed-form expectation `m ⊙ ∇f(w)` (exact for quadratics).
#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasednessReport {
    pub mean: Vec<f64>,
    /// `m ⊙ ∇f(w)`.
    pub expected: Vec<f64>,
    /// `|mean − expected| / SE` per coordinate; 0 where both deviation and
    /// SE vanish (masked coordinates), infinite if SE alone vanishes.
    pub deviation_se: Vec<f64>,
    pub max_deviation_se: f64,
    pub samples: usize,
}

/// Monte-Carlo check that the averaged estimator is centered on the masked
/// gradient. The objective must have an exact `true_grad` and quadratic
/// structure for the closed-form expectation to be exact; `kind` must be a
/// difference estimator (the one-point form has matching expectation but
/// orders-of-magnitude larger variance, which would drown the report).
pub fn mc_unbiasedness(
    objective: &dyn Objective,
    w: &ParamVector,
    m: &Mask,
    mu: f64,
    kind: EstimatorKind,
    samples: usize,
    rng: &RngStream,
) -> Result<UnbiasednessReport> {
    if kind == EstimatorKind::OnePoint {
        return Err(SzoError::Domain(
            "unbiasedness check supports only the difference estimators".into(),
        ));
    }
    if samples == 0 {
        return Err(SzoError::Domain("samples must be at least 1".into()));
    }
    let n = w.len();
    let batch = Batch::empty();
    let (batches, per) = batch_layout(samples);
    let partials: Vec<Result<(Vec<f64>, Vec<f64>)>> = map_indexed(batches, |b| {
        let count = per.min(samples - b * per);
        let mut stream = rng.substream(batches as u64, b as u64);
        let mut sum = vec![0.0; n];
        let mut sumsq = vec![0.0; n];
        for _ in 0..count {
            let est = estimate_single(objective, w, &batch, m, mu, kind, &mut stream)?;
            for (i, g) in est.g.iter().enumerate() {
                sum[i] += g;
                sumsq[i] += g * g;
            }
        }
        Ok((sum, sumsq))
    });
    let mut sum = vec![0.0; n];
    let mut sumsq = vec![0.0; n];
    for partial in partials {
        let (s, sq) = partial?;
        for i in 0..n {
            sum[i] += s[i];
            sumsq[i] += sq[i];
        }
    }
    let ns = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / ns).collect();
    let grad = objective.true_grad(w, &batch)?;
    let expected: Vec<f64> =
        grad.iter().enumerate().map(|(i, &g)| if m.get(i) { g } else { 0.0 }).collect();
    let deviation_se: Vec<f64> = (0..n)
        .map(|i| {
            let se = ((sumsq[i] / ns - mean[i] * mean[i]).max(0.0) / ns).sqrt();
            let dev = (mean[i] - expected[i]).abs();
            if dev == 0.0 {
                0.0
            } else if se == 0.0 {
                f64::INFINITY
            } else {
                dev / se
            }
        })
        .collect();
    let max_deviation_se = deviation_se.iter().cloned().fold(0.0, f64::max);
    Ok(UnbiasednessReport { mean, expected, deviation_se, max_deviation_se, samples })
}

/// Both sides of the gradient-norm recovery inequality and its verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    /// ‖∇f(w)‖².
    pub lhs: f64,
    /// 2‖m ⊙ ∇f(w)‖² + (μ²L²/2)(n̄+4)³.
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates `‖∇f‖² ≤ 2‖m ⊙ ∇f‖² + (μ²L²/2)(n̄+4)³` at `w`.
///
/// The inequality is a *conditional* guarantee: it holds when the mask is
/// aligned with the gradient support (and always for the full mask), but a
/// mask that zeroes a large-gradient coordinate falsifies it as μ → 0.
/// This checker reports the violation rather than hiding it.
pub fn check_gradient_recovery(
    objective: &dyn Objective,
    w: &ParamVector,
    m: &Mask,
    mu: f64,
    l_const: f64,
) -> Result<BoundCheck> {
    if mu <= 0.0 || l_const <= 0.0 {
        return Err(SzoError::Domain(format!(
            "mu and L must be positive, got mu = {mu}, L = {l_const}"
        )));
    }
    SzoError::check_len(w.len(), m.len())?;
    let grad = objective.true_grad(w, &Batch::empty())?;
    let lhs: f64 = grad.iter().map(|g| g * g).sum();
    let masked_sq: f64 =
        grad.iter().enumerate().filter(|(i, _)| m.get(*i)).map(|(_, g)| g * g).sum();
    let nbar4 = m.nbar() as f64 + 4.0;
    let rhs = 2.0 * masked_sq + 0.5 * mu * mu * l_const * l_const * nbar4.powi(3);
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs })
}

/// Predicted bound on the expected squared gradient norm after `t` steps at
/// the analytic step size: `16(n̂+4)L·gap/(t+1) + (μ²L²/2)(n̂+4)²(n̂+11/2)`,
/// where `gap` is the initial objective suboptimality and `n̂` bounds the
/// active-coordinate count.
pub fn convergence_bound(nhat: f64, l_const: f64, gap: f64, t: u64, mu: f64) -> Result<f64> {
    if !(nhat > 0.0 && l_const > 0.0 && gap > 0.0 && mu > 0.0) {
        return Err(SzoError::Domain(format!(
            "all inputs must be positive: nhat = {nhat}, L = {l_const}, gap = {gap}, mu = {mu}"
        )));
    }
    let n4 = nhat + 4.0;
    let first = 16.0 * n4 * l_const * gap / (t as f64 + 1.0);
    let second = 0.5 * mu * mu * l_const * l_const * n4 * n4 * (nhat + 5.5);
    Ok(first + second)
}
