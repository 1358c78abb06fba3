//! Differentiable test problems with zeroth-order and first-order access.
//!
//! Every objective exposes both `eval` (the only thing the optimizer is
//! allowed to use) and `true_grad` (analytic gradient, used by diagnostics
//! and verification only). Classification objectives additionally expose
//! `predict` and carry their dataset.

mod dataset;
mod idx;
mod logistic;
mod mlp;
mod quadratic;

pub use dataset::{synth_blobs, Dataset};
pub use idx::{load_idx, mnist_from_dir, IdxData, IDX_MAGIC_IMAGES, IDX_MAGIC_LABELS};
pub use logistic::{logistic_objective, LogisticObjective};
pub use mlp::{mlp_objective, MlpObjective};
pub use quadratic::{
    linear_objective, quadratic_objective, sparse_quadratic_objective, QuadMatrix,
    QuadraticObjective,
};

use std::sync::Arc;

use crate::error::Result;
use crate::param::{Layout, ParamVector};
use crate::rng::RngStream;

/// A minibatch: indices into an objective's dataset. Analytic objectives
/// ignore it and accept the empty batch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Batch {
    indices: Vec<usize>,
}

impl Batch {
    /// The empty batch used by pure analytic objectives.
    pub fn empty() -> Batch {
        Batch { indices: Vec::new() }
    }

    pub fn new(indices: Vec<usize>) -> Batch {
        Batch { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// A test problem: deterministic loss and analytic gradient as functions of
/// `(w, batch)`.
pub trait Objective: Send + Sync {
    /// Number of parameters `n`.
    fn dim(&self) -> usize;

    /// Segment layout of the parameter vector.
    fn layout(&self) -> &Arc<Layout>;

    /// Short human-readable identifier for run metadata.
    fn id(&self) -> String;

    /// Loss at `w` on `batch`. Deterministic in both arguments.
    fn eval(&self, w: &ParamVector, batch: &Batch) -> Result<f64>;

    /// Analytic gradient at `w` on `batch`. Deterministic; matches central
    /// finite differences of `eval` (verified by the oracle tests).
    fn true_grad(&self, w: &ParamVector, batch: &Batch) -> Result<Vec<f64>>;

    /// Predicted class labels, for classification objectives only.
    fn predict(&self, _w: &ParamVector, _batch: &Batch) -> Result<Option<Vec<usize>>> {
        Ok(None)
    }

    /// Known upper bound on the gradient's Lipschitz constant, if any.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }

    /// The dataset backing this objective, for classification objectives.
    fn dataset(&self) -> Option<&Arc<Dataset>> {
        None
    }

    /// Draws the initial parameter vector for a run. Deterministic in the
    /// stream. Each objective documents its own scheme.
    fn init_params(&self, rng: &mut RngStream) -> ParamVector;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_basics() {
        assert!(Batch::empty().is_empty());
        let b = Batch::new(vec![3, 1, 4]);
        assert_eq!(b.len(), 3);
        assert_eq!(b.indices(), &[3, 1, 4]);
    }
}
