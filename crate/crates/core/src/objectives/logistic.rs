//! Multinomial logistic regression: softmax cross-entropy over linear
//! scores plus an l2 penalty on the whole parameter vector.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use crate::error::{Result, SzoError};
use crate::objectives::{Batch, Dataset, Objective};
use crate::param::{Layout, ParamVector};
use crate::rng::RngStream;

/// Softmax regression over a dataset. Parameters are a `C×d` weight matrix
/// followed by a length-`C` bias, flattened row-major into segments
/// `weights` and `bias`. The regularizer `l2·‖w‖²/2` covers the full
/// parameter vector, bias included.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    data: Arc<Dataset>,
    classes: usize,
    l2: f64,
    layout: Arc<Layout>,
}

/// Builds a logistic objective. Errors on fewer than 2 classes, an empty
/// dataset, or a negative l2.
pub fn logistic_objective(
    data: Arc<Dataset>,
    num_classes: usize,
    l2: f64,
) -> Result<LogisticObjective> {
    if num_classes < 2 {
        return Err(SzoError::Domain("logistic objective needs at least 2 classes".into()));
    }
    if data.num_examples() == 0 {
        return Err(SzoError::Domain("dataset is empty".into()));
    }
    if l2 < 0.0 {
        return Err(SzoError::Domain("l2 must be non-negative".into()));
    }
    let d = data.num_features();
    let layout = Arc::new(Layout::from_parts([("weights", num_classes * d), ("bias", num_classes)]));
    Ok(LogisticObjective { data, classes: num_classes, l2, layout })
}

impl LogisticObjective {
    fn features(&self) -> usize {
        self.data.num_features()
    }

    fn check_batch(&self, w: &ParamVector, batch: &Batch) -> Result<()> {
        SzoError::check_len(self.dim(), w.len())?;
        if batch.is_empty() {
            return Err(SzoError::Domain("logistic objective needs a non-empty batch".into()));
        }
        if let Some(&bad) = batch.indices().iter().find(|&&i| i >= self.data.num_examples()) {
            return Err(SzoError::Domain(format!("batch index {bad} out of range")));
        }
        Ok(())
    }

    /// (batch × classes) score matrix `XWᵀ + b`.
    fn scores(&self, w: &[f64], x: &Array2<f64>) -> Array2<f64> {
        let d = self.features();
        let weights = ArrayView2::from_shape((self.classes, d), &w[..self.classes * d])
            .expect("layout guarantees the shape");
        let bias = &w[self.classes * d..];
        let mut scores = x.dot(&weights.t());
        for mut row in scores.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v += bias[c];
            }
        }
        scores
    }
}

/// Row-stable softmax probabilities and mean cross-entropy of `scores`
/// against `labels`. Shared by the logistic and MLP objectives.
pub(crate) fn softmax_ce(scores: &Array2<f64>, labels: &[usize]) -> (Array2<f64>, f64) {
    let mut probs = scores.clone();
    let mut loss = 0.0;
    for (mut row, &y) in probs.rows_mut().into_iter().zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        loss -= row[y].ln();
    }
    (probs, loss / labels.len() as f64)
}

/// First-max argmax (ties resolve to the lowest class index).
pub(crate) fn argmax_rows(scores: &Array2<f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

impl Objective for LogisticObjective {
    fn dim(&self) -> usize {
        self.layout.total_len()
    }

    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn id(&self) -> String {
        format!("logistic(d={}, C={}, l2={})", self.features(), self.classes, self.l2)
    }

    fn eval(&self, w: &ParamVector, batch: &Batch) -> Result<f64> {
        self.check_batch(w, batch)?;
        let x = self.data.gather(batch.indices());
        let labels: Vec<usize> =
            batch.indices().iter().map(|&i| self.data.labels()[i]).collect();
        let scores = self.scores(w.values(), &x);
        let (_, ce) = softmax_ce(&scores, &labels);
        let reg = 0.5 * self.l2 * w.values().iter().map(|v| v * v).sum::<f64>();
        Ok(ce + reg)
    }

    fn true_grad(&self, w: &ParamVector, batch: &Batch) -> Result<Vec<f64>> {
        self.check_batch(w, batch)?;
        let x = self.data.gather(batch.indices());
        let labels: Vec<usize> =
            batch.indices().iter().map(|&i| self.data.labels()[i]).collect();
        let scores = self.scores(w.values(), &x);
        let (mut probs, _) = softmax_ce(&scores, &labels);
        let bsize = labels.len() as f64;
        for (mut row, &y) in probs.rows_mut().into_iter().zip(&labels) {
            row[y] -= 1.0;
        }
        // grad_W = (1/B)·probsᵀX, grad_b = (1/B)·column sums, plus l2·w.
        let d = self.features();
        let grad_w = probs.t().dot(&x);
        let mut grad = vec![0.0; self.dim()];
        for c in 0..self.classes {
            for j in 0..d {
                grad[c * d + j] = grad_w[[c, j]] / bsize;
            }
            grad[self.classes * d + c] = probs.column(c).sum() / bsize;
        }
        for (g, v) in grad.iter_mut().zip(w.values()) {
            *g += self.l2 * v;
        }
        Ok(grad)
    }

    fn predict(&self, w: &ParamVector, batch: &Batch) -> Result<Option<Vec<usize>>> {
        self.check_batch(w, batch)?;
        let x = self.data.gather(batch.indices());
        Ok(Some(argmax_rows(&self.scores(w.values(), &x))))
    }

    fn dataset(&self) -> Option<&Arc<Dataset>> {
        Some(&self.data)
    }

    /// All-zero initial point (uniform predictions).
    fn init_params(&self, _rng: &mut RngStream) -> ParamVector {
        ParamVector::zeros(Arc::clone(&self.layout))
    }
}
