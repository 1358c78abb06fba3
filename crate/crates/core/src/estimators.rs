//! Gaussian-smoothed zeroth-order gradient estimators with sparse
//! perturbations.
//!
//! Each sample draws `u ~ N(0, I)`, masks it to `ū = m ⊙ u`, and scales `ū`
//! by a finite-difference ratio of the objective:
//!
//! - one-point: `f(w + μū)/μ · ū`
//! - two-point: `(f(w + μū) − f(w))/μ · ū`
//! - two-sided: `(f(w + μū) − f(w − μū))/(2μ) · ū`
//!
//! Because the output is a scalar times `ū`, every masked coordinate is
//! exactly zero — the support invariant the freezing/pruning optimizer
//! variants rely on. Averaging over `k` samples reduces variance; `fevals`
//! counts objective evaluations (1 per sample for one-point, 2 for the
//! others) because evaluations are the cost unit all experiments report.

use crate::error::{Result, SzoError};
use crate::exec::{map_indexed, map_indexed_seq};
use crate::mask::Mask;
use crate::objectives::{Batch, Objective};
use crate::param::ParamVector;
use crate::rng::RngStream;

/// Which finite-difference ratio scales the perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    OnePoint,
    TwoPoint,
    TwoSided,
}

impl EstimatorKind {
    /// Objective evaluations consumed per sample.
    pub fn evals_per_sample(self) -> usize {
        match self {
            EstimatorKind::OnePoint => 1,
            EstimatorKind::TwoPoint | EstimatorKind::TwoSided => 2,
        }
    }
}

/// A (possibly averaged) smoothed-gradient estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    /// The estimate; its support is contained in the mask's.
    pub g: Vec<f64>,
    /// Smoothing scale used.
    pub mu: f64,
    /// Number of averaged samples.
    pub k: usize,
    pub kind: EstimatorKind,
    /// Objective evaluations consumed (`k · evals_per_sample`).
    pub fevals: usize,
}

fn perturbed(w: &ParamVector, ubar: &[f64], scale: f64) -> Result<ParamVector> {
    let values: Vec<f64> =
        w.values().iter().zip(ubar).map(|(w, u)| w + scale * u).collect();
    w.with_values(values)
}

fn eval_finite(
    objective: &dyn Objective,
    w: &ParamVector,
    batch: &Batch,
    what: &str,
) -> Result<f64> {
    let f = objective.eval(w, batch)?;
    if !f.is_finite() {
        return Err(SzoError::NonFinite {
            context: format!("objective evaluation at {what}"),
            at: Some(w.values().to_vec()),
        });
    }
    Ok(f)
}

/// One estimator sample: draws the perturbation from `rng`, evaluates the
/// objective, and returns the scaled masked direction.
pub fn estimate_single(
    objective: &dyn Objective,
    w: &ParamVector,
    batch: &Batch,
    m: &Mask,
    mu: f64,
    kind: EstimatorKind,
    rng: &mut RngStream,
) -> Result<GradEstimate> {
    if mu <= 0.0 {
        return Err(SzoError::Domain(format!("smoothing parameter must be positive, got {mu}")));
    }
    SzoError::check_len(w.len(), m.len())?;
    let u = rng.sample_std_normal(w.len());
    let ubar: Vec<f64> =
        u.iter().enumerate().map(|(i, &x)| if m.get(i) { x } else { 0.0 }).collect();
    let ratio = match kind {
        EstimatorKind::OnePoint => {
            let fp = eval_finite(objective, &perturbed(w, &ubar, mu)?, batch, "w + μū")?;
            fp / mu
        }
        EstimatorKind::TwoPoint => {
            let f0 = eval_finite(objective, w, batch, "w")?;
            let fp = eval_finite(objective, &perturbed(w, &ubar, mu)?, batch, "w + μū")?;
            (fp - f0) / mu
        }
        EstimatorKind::TwoSided => {
            let fp = eval_finite(objective, &perturbed(w, &ubar, mu)?, batch, "w + μū")?;
            let fm = eval_finite(objective, &perturbed(w, &ubar, -mu)?, batch, "w − μū")?;
            (fp - fm) / (2.0 * mu)
        }
    };
    let g = ubar.iter().map(|&u| ratio * u).collect();
    Ok(GradEstimate { g, mu, k: 1, kind, fevals: kind.evals_per_sample() })
}

/// Mean of `k` samples. Sample `j` runs on the derived stream
/// `rng.substream(k, j)` and partial results are reduced in ascending `j`,
/// so the parallel and sequential paths are bit-identical; errors propagate
/// from the lowest failing sample index.
pub fn estimate_avg(
    objective: &dyn Objective,
    w: &ParamVector,
    batch: &Batch,
    m: &Mask,
    mu: f64,
    kind: EstimatorKind,
    k: usize,
    rng: &RngStream,
) -> Result<GradEstimate> {
    if k == 0 {
        return Err(SzoError::Domain("sample count k must be at least 1".into()));
    }
    let samples = map_indexed(k, |j| {
        let mut stream = rng.substream(k as u64, j as u64);
        estimate_single(objective, w, batch, m, mu, kind, &mut stream)
    });
    reduce_samples(samples, mu, kind, k)
}

/// Always-sequential twin of [`estimate_avg`], used by tests and benches to
/// pin down the bit-identity contract between the two execution paths.
pub fn estimate_avg_seq(
    objective: &dyn Objective,
    w: &ParamVector,
    batch: &Batch,
    m: &Mask,
    mu: f64,
    kind: EstimatorKind,
    k: usize,
    rng: &RngStream,
) -> Result<GradEstimate> {
    if k == 0 {
        return Err(SzoError::Domain("sample count k must be at least 1".into()));
    }
    let samples = map_indexed_seq(k, |j| {
        let mut stream = rng.substream(k as u64, j as u64);
        estimate_single(objective, w, batch, m, mu, kind, &mut stream)
    });
    reduce_samples(samples, mu, kind, k)
}

fn reduce_samples(
    samples: Vec<Result<GradEstimate>>,
    mu: f64,
    kind: EstimatorKind,
    k: usize,
) -> Result<GradEstimate> {
    let mut g: Option<Vec<f64>> = None;
    let mut fevals = 0;
    for sample in samples {
        let sample = sample?;
        fevals += sample.fevals;
        match &mut g {
            None => g = Some(sample.g),
            Some(acc) => {
                for (a, s) in acc.iter_mut().zip(&sample.g) {
                    *a += s;
                }
            }
        }
    }
    let mut g = g.expect("k ≥ 1 checked above");
    let scale = 1.0 / k as f64;
    for v in &mut g {
        *v *= scale;
    }
    Ok(GradEstimate { g, mu, k, kind, fevals })
}
