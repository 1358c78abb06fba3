//! Run diagnostics: distance of the estimate to the true gradient, local and
//! neighborhood Lipschitz probes, classification accuracy, coordinate
//! histograms of the true gradient, and the exponential smoothing used for
//! plotting.
//!
//! This module defines row *semantics* only; serialization to CSV lives in
//! the command-line crate.

use crate::error::{Result, SzoError};
use crate::objectives::{Batch, Objective};
use crate::param::{l2_dist, l2_norm, ParamVector};
use crate::rng::RngStream;

/// Identity of a run, carried alongside its rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeta {
    /// Hash of the fully resolved configuration (hex string).
    pub config_hash: String,
    pub seed: u64,
    pub objective_id: String,
}

/// One logged optimizer step. `l_local`, `l_neighbor`, and `test_acc` are
/// absent on steps where they are not measured.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub examples_seen: u64,
    pub fevals: u64,
    /// Fraction of coordinates currently masked, in [0, 1].
    pub sparsity: f64,
    pub train_loss: f64,
    /// Exact running sum of `train_loss` over rows.
    pub cum_loss: f64,
    /// ‖g − ∇f‖ between the estimate and the same-batch true gradient;
    /// absent on evaluation-only rows (no estimate was drawn).
    pub grad_dist: Option<f64>,
    pub l_local: Option<f64>,
    pub l_neighbor: Option<f64>,
    pub test_acc: Option<f64>,
}

/// Rows of one run in step order, plus run identity.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub rows: Vec<MetricsRow>,
}

impl RunRecord {
    pub fn new(meta: RunMeta) -> Self {
        RunRecord { meta, rows: Vec::new() }
    }

    /// Appends a row, enforcing strictly increasing steps, sparsity in
    /// [0, 1], and the exact running-sum contract for `cum_loss`.
    pub fn push(&mut self, row: MetricsRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(SzoError::Domain(format!(
                    "rows must be strictly increasing in step: {} after {}",
                    row.step, last.step
                )));
            }
            let expected = last.cum_loss + row.train_loss;
            if row.cum_loss != expected && !(row.cum_loss.is_nan() && expected.is_nan()) {
                return Err(SzoError::Domain(format!(
                    "cum_loss must be the exact running sum: got {}, expected {}",
                    row.cum_loss, expected
                )));
            }
        } else if row.cum_loss != row.train_loss
            && !(row.cum_loss.is_nan() && row.train_loss.is_nan())
        {
            return Err(SzoError::Domain(
                "first row must have cum_loss equal to train_loss".into(),
            ));
        }
        if !(0.0..=1.0).contains(&row.sparsity) {
            return Err(SzoError::Domain(format!(
                "sparsity must lie in [0, 1], got {}",
                row.sparsity
            )));
        }
        self.rows.push(row);
        Ok(())
    }
}

/// Euclidean distance ‖g − ∇f‖ between an estimate and the true gradient.
pub fn grad_distance(g: &[f64], true_grad: &[f64]) -> Result<f64> {
    SzoError::check_len(true_grad.len(), g.len())?;
    Ok(l2_dist(g, true_grad))
}

/// Secant estimate of the Lipschitz constant between two iterates:
/// ‖∇f(w_prev) − ∇f(w)‖ / ‖w_prev − w‖. Absent when the iterates are
/// (numerically) identical, so plots skip the point instead of dividing by
/// zero.
pub fn lipschitz_local(
    w_prev: &[f64],
    w: &[f64],
    grad_prev: &[f64],
    grad: &[f64],
) -> Option<f64> {
    assert_eq!(w_prev.len(), w.len(), "iterates must have equal length");
    assert_eq!(grad_prev.len(), grad.len(), "gradients must have equal length");
    let dw = l2_dist(w_prev, w);
    if dw < 1e-12 {
        return None;
    }
    Some(l2_dist(grad_prev, grad) / dw)
}

/// Gradient-variation probe around `w`: the max over `samples` draws of
/// ‖∇f(w) − ∇f(w + v)‖/‖v‖ with `v` componentwise uniform in
/// [−half_range, half_range]. A zero-norm draw (probability zero) is
/// redrawn.
pub fn lipschitz_neighbor(
    objective: &dyn Objective,
    w: &ParamVector,
    batch: &Batch,
    rng: &mut RngStream,
    samples: usize,
    half_range: f64,
) -> Result<f64> {
    if samples == 0 {
        return Err(SzoError::Domain("samples must be at least 1".into()));
    }
    if !(half_range > 0.0) {
        return Err(SzoError::Domain(format!(
            "half_range must be positive, got {half_range}"
        )));
    }
    let grad_here = objective.true_grad(w, batch)?;
    let mut max_ratio = 0.0f64;
    for _ in 0..samples {
        let (shifted, norm_v) = loop {
            let v: Vec<f64> =
                (0..w.len()).map(|_| rng.next_range(-half_range, half_range)).collect();
            let norm_v = l2_norm(&v);
            if norm_v > 0.0 {
                let values: Vec<f64> =
                    w.values().iter().zip(&v).map(|(w, v)| w + v).collect();
                break (w.with_values(values)?, norm_v);
            }
        };
        let grad_there = objective.true_grad(&shifted, batch)?;
        max_ratio = max_ratio.max(l2_dist(&grad_here, &grad_there) / norm_v);
    }
    Ok(max_ratio)
}

/// Exponential moving average with `out[0] = in[0]` and
/// `out[t] = factor·out[t−1] + (1−factor)·in[t]`.
pub fn ema(series: &[f64], factor: f64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&factor), "factor must lie in [0, 1), got {factor}");
    let mut out = Vec::with_capacity(series.len());
    for (t, &x) in series.iter().enumerate() {
        if t == 0 {
            out.push(x);
        } else {
            out.push(factor * out[t - 1] + (1.0 - factor) * x);
        }
    }
    out
}

/// Fraction of argmax-correct predictions of a classification objective on
/// the given example indices.
pub fn accuracy(objective: &dyn Objective, w: &ParamVector, split: &[usize]) -> Result<f64> {
    if split.is_empty() {
        return Err(SzoError::Domain("accuracy needs a non-empty split".into()));
    }
    let batch = Batch::new(split.to_vec());
    let predictions = objective
        .predict(w, &batch)?
        .ok_or_else(|| SzoError::Domain("objective does not produce class predictions".into()))?;
    let data = objective
        .dataset()
        .ok_or_else(|| SzoError::Domain("objective has no dataset to score against".into()))?;
    SzoError::check_len(split.len(), predictions.len())?;
    let correct = split
        .iter()
        .zip(&predictions)
        .filter(|(&i, &p)| data.labels()[i] == p)
        .count();
    Ok(correct as f64 / split.len() as f64)
}

/// Coordinate-value histogram of a gradient, with the exact count of
/// coordinates equal to zero tracked separately (binning alone cannot
/// distinguish exact zeros from small values).
#[derive(Debug, Clone, PartialEq)]
pub struct GradHistogram {
    /// `bins + 1` edges; bin `i` covers `[edges[i], edges[i+1])`, and the
    /// last bin includes its upper edge.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub zero_count: usize,
}

/// Bins `true_grad` into `bins` equal-width buckets over its value range.
/// A constant gradient gets a unit-width range centered on the value.
pub fn grad_histogram(true_grad: &[f64], bins: usize) -> Result<GradHistogram> {
    if bins == 0 {
        return Err(SzoError::Domain("histogram needs at least one bin".into()));
    }
    if true_grad.is_empty() {
        return Err(SzoError::Domain("histogram needs a non-empty gradient".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in true_grad {
        if !x.is_finite() {
            return Err(SzoError::NonFinite {
                context: "gradient coordinate in histogram".into(),
                at: None,
            });
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    let mut zero_count = 0usize;
    for &x in true_grad {
        if x == 0.0 {
            zero_count += 1;
        }
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(GradHistogram { edges, counts, zero_count })
}
