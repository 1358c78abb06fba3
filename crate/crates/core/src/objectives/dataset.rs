//! In-memory classification datasets and synthetic data generation.

use ndarray::Array2;

use crate::error::{Result, SzoError};
use crate::rng::RngStream;

/// A labelled dataset with disjoint train/dev/test splits.
#[derive(Debug, Clone)]
pub struct Dataset {
    inputs: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    train: Vec<usize>,
    dev: Vec<usize>,
    test: Vec<usize>,
}

impl Dataset {
    /// Validates label range and split disjointness.
    pub fn new(
        inputs: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        train: Vec<usize>,
        dev: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Dataset> {
        let n = inputs.nrows();
        SzoError::check_len(n, labels.len())?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(SzoError::Domain(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&dev).chain(&test) {
            if i >= n {
                return Err(SzoError::Domain(format!("split index {i} out of range")));
            }
            if seen[i] {
                return Err(SzoError::Domain(format!("splits overlap at index {i}")));
            }
            seen[i] = true;
        }
        Ok(Dataset { inputs, labels, num_classes, train, dev, test })
    }

    pub fn num_examples(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn dev(&self) -> &[usize] {
        &self.dev
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    /// Copies the rows at `indices` into a dense (batch × features) matrix.
    pub fn gather(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.num_features()));
        for (row, &i) in indices.iter().enumerate() {
            out.row_mut(row).assign(&self.inputs.row(i));
        }
        out
    }
}

/// Synthesizes Gaussian class clusters with distinct means and a per-class
/// 60/20/20 train/dev/test split.
///
/// Class `c` is centered at `3·(1 + c/dims)` along axis `c mod dims`, so
/// means are pairwise distinct for any `classes`/`dims` combination; points
/// are the mean plus `spread`-scaled standard normal noise. Examples are
/// stored class-major, and each class contributes the first 60% of its
/// points to train, the next 20% to dev, and the rest to test, keeping all
/// three splits class-balanced.
pub fn synth_blobs(
    rng: &mut RngStream,
    classes: usize,
    dims: usize,
    per_class: usize,
    spread: f64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(SzoError::Domain("synth_blobs needs at least 2 classes".into()));
    }
    if per_class < 1 || dims < 1 {
        return Err(SzoError::Domain("synth_blobs needs per_class ≥ 1 and dims ≥ 1".into()));
    }
    if spread < 0.0 {
        return Err(SzoError::Domain("spread must be non-negative".into()));
    }
    let total = classes * per_class;
    let mut inputs = Array2::zeros((total, dims));
    let mut labels = Vec::with_capacity(total);
    for c in 0..classes {
        let axis = c % dims;
        let scale = 3.0 * (1.0 + (c / dims) as f64);
        for i in 0..per_class {
            let row = c * per_class + i;
            let noise = rng.sample_std_normal(dims);
            for d in 0..dims {
                let mean = if d == axis { scale } else { 0.0 };
                inputs[[row, d]] = mean + spread * noise[d];
            }
            labels.push(c);
        }
    }
    let train_n = per_class * 3 / 5;
    let dev_n = per_class / 5;
    let (mut train, mut dev, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..classes {
        for i in 0..per_class {
            let idx = c * per_class + i;
            if i < train_n {
                train.push(idx);
            } else if i < train_n + dev_n {
                dev.push(idx);
            } else {
                test.push(idx);
            }
        }
    }
    Dataset::new(inputs, labels, classes, train, dev, test)
}
