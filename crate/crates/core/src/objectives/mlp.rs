//! Fully-connected feed-forward network with tanh hidden activations and a
//! softmax cross-entropy output, with analytic backprop gradients.
//!
//! The hidden activation is tanh rather than a piecewise-linear choice so
//! the gradient is Lipschitz everywhere and the local-smoothness
//! diagnostics are well defined along the whole optimization path. There is
//! no batch normalization: it would entangle the analytic gradient with
//! batch statistics and is orthogonal to the sparse-perturbation mechanics
//! studied here (noted as a deviation in the README).

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use crate::error::{Result, SzoError};
use crate::objectives::logistic::{argmax_rows, softmax_ce};
use crate::objectives::{Batch, Dataset, Objective};
use crate::param::{Layout, ParamVector};
use crate::rng::RngStream;

/// Multi-layer perceptron over a dataset. Layer `l` of `sizes = [d, h1,
/// ..., C]` owns segments `w{l}` (out×in, row-major) and `b{l}` (out).
#[derive(Debug, Clone)]
pub struct MlpObjective {
    data: Arc<Dataset>,
    sizes: Vec<usize>,
    layout: Arc<Layout>,
}

/// Builds an MLP objective. `layer_sizes[0]` must equal the dataset's
/// feature count and the last entry its class count; every size must be
/// positive and at least two layers are required.
pub fn mlp_objective(layer_sizes: &[usize], data: Arc<Dataset>) -> Result<MlpObjective> {
    if layer_sizes.len() < 2 {
        return Err(SzoError::Domain("mlp needs at least 2 layer sizes".into()));
    }
    if layer_sizes.contains(&0) {
        return Err(SzoError::Domain("layer sizes must be positive".into()));
    }
    SzoError::check_len(data.num_features(), layer_sizes[0])?;
    SzoError::check_len(data.num_classes(), *layer_sizes.last().expect("nonempty"))?;
    let mut parts = Vec::new();
    for l in 1..layer_sizes.len() {
        parts.push((format!("w{l}"), layer_sizes[l] * layer_sizes[l - 1]));
        parts.push((format!("b{l}"), layer_sizes[l]));
    }
    let layout = Arc::new(Layout::from_parts(parts));
    Ok(MlpObjective { data, sizes: layer_sizes.to_vec(), layout })
}

impl MlpObjective {
    fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn weight_view<'a>(&self, w: &'a [f64], l: usize) -> ArrayView2<'a, f64> {
        let seg = self.layout.segment(&format!("w{l}")).expect("layer exists");
        ArrayView2::from_shape((self.sizes[l], self.sizes[l - 1]), &w[seg.offset..seg.offset + seg.len])
            .expect("segment length matches shape")
    }

    fn bias_slice<'a>(&self, w: &'a [f64], l: usize) -> &'a [f64] {
        let seg = self.layout.segment(&format!("b{l}")).expect("layer exists");
        &w[seg.offset..seg.offset + seg.len]
    }

    fn check_batch(&self, w: &ParamVector, batch: &Batch) -> Result<()> {
        SzoError::check_len(self.dim(), w.len())?;
        if batch.is_empty() {
            return Err(SzoError::Domain("mlp objective needs a non-empty batch".into()));
        }
        if let Some(&bad) = batch.indices().iter().find(|&&i| i >= self.data.num_examples()) {
            return Err(SzoError::Domain(format!("batch index {bad} out of range")));
        }
        Ok(())
    }

    /// Forward pass returning the activation of every layer: `acts[0]` is
    /// the input batch, `acts[l]` the (tanh) output of layer `l`, and the
    /// final entry the raw scores.
    fn forward(&self, w: &[f64], x: Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x];
        for l in 1..=self.num_layers() {
            let prev = acts.last().expect("nonempty");
            let mut z = prev.dot(&self.weight_view(w, l).t());
            let bias = self.bias_slice(w, l);
            for mut row in z.rows_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v += bias[j];
                }
            }
            if l < self.num_layers() {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        acts
    }

    fn batch_labels(&self, batch: &Batch) -> Vec<usize> {
        batch.indices().iter().map(|&i| self.data.labels()[i]).collect()
    }
}

impl Objective for MlpObjective {
    fn dim(&self) -> usize {
        self.layout.total_len()
    }

    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn id(&self) -> String {
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        format!("mlp({})", sizes.join("-"))
    }

    fn eval(&self, w: &ParamVector, batch: &Batch) -> Result<f64> {
        self.check_batch(w, batch)?;
        let x = self.data.gather(batch.indices());
        let acts = self.forward(w.values(), x);
        let scores = acts.last().expect("nonempty");
        let (_, ce) = softmax_ce(scores, &self.batch_labels(batch));
        Ok(ce)
    }

    fn true_grad(&self, w: &ParamVector, batch: &Batch) -> Result<Vec<f64>> {
        self.check_batch(w, batch)?;
        let labels = self.batch_labels(batch);
        let x = self.data.gather(batch.indices());
        let acts = self.forward(w.values(), x);
        let scores = acts.last().expect("nonempty");
        let (mut delta, _) = softmax_ce(scores, &labels);
        let bsize = labels.len() as f64;
        for (mut row, &y) in delta.rows_mut().into_iter().zip(&labels) {
            row[y] -= 1.0;
        }
        delta.mapv_inplace(|v| v / bsize);

        let mut grad = vec![0.0; self.dim()];
        for l in (1..=self.num_layers()).rev() {
            let prev = &acts[l - 1];
            let grad_w = delta.t().dot(prev);
            let wseg = self.layout.segment(&format!("w{l}")).expect("layer exists");
            let bseg = self.layout.segment(&format!("b{l}")).expect("layer exists");
            let (out_dim, in_dim) = (self.sizes[l], self.sizes[l - 1]);
            for o in 0..out_dim {
                for i in 0..in_dim {
                    grad[wseg.offset + o * in_dim + i] = grad_w[[o, i]];
                }
                grad[bseg.offset + o] = delta.column(o).sum();
            }
            if l > 1 {
                // Backpropagate through tanh: prev = tanh(z), tanh' = 1 − prev².
                let mut next = delta.dot(&self.weight_view(w.values(), l));
                next.zip_mut_with(prev, |d, &a| *d *= 1.0 - a * a);
                delta = next;
            }
        }
        Ok(grad)
    }

    fn predict(&self, w: &ParamVector, batch: &Batch) -> Result<Option<Vec<usize>>> {
        self.check_batch(w, batch)?;
        let x = self.data.gather(batch.indices());
        let acts = self.forward(w.values(), x);
        Ok(Some(argmax_rows(acts.last().expect("nonempty"))))
    }

    fn dataset(&self) -> Option<&Arc<Dataset>> {
        Some(&self.data)
    }

    /// Xavier-normal initial point: each weight matrix drawn N(0, σ²) with
    /// σ = sqrt(2/(fan_in+fan_out)), biases zero, segments filled in layer
    /// order so the draw sequence is fixed.
    fn init_params(&self, rng: &mut RngStream) -> ParamVector {
        let mut values = vec![0.0; self.dim()];
        for l in 1..=self.num_layers() {
            let (fan_out, fan_in) = (self.sizes[l], self.sizes[l - 1]);
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let seg = self.layout.segment(&format!("w{l}")).expect("layer exists");
            for (slot, draw) in values[seg.offset..seg.offset + seg.len]
                .iter_mut()
                .zip(rng.sample_std_normal(seg.len))
            {
                *slot = std * draw;
            }
        }
        ParamVector::new(values, Arc::clone(&self.layout)).expect("finite by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::synth_blobs;

    fn data_3c() -> Arc<Dataset> {
        let mut rng = RngStream::new(6, 0);
        Arc::new(synth_blobs(&mut rng, 3, 2, 12, 0.4).unwrap())
    }

    #[test]
    fn parameter_count_matches_arithmetic() {
        let mut rng = RngStream::new(7, 0);
        let data = Arc::new(synth_blobs(&mut rng, 10, 64, 2, 0.5).unwrap());
        let obj = mlp_objective(&[64, 32, 10], data).unwrap();
        assert_eq!(obj.dim(), 64 * 32 + 32 + 32 * 10 + 10);
        assert_eq!(obj.dim(), 2410);
    }

    #[test]
    fn zero_weights_give_log_c_loss() {
        let data = data_3c();
        let obj = mlp_objective(&[2, 16, 3], Arc::clone(&data)).unwrap();
        let w = ParamVector::zeros(Arc::clone(obj.layout()));
        let batch = Batch::new(data.train().to_vec());
        let loss = obj.eval(&w, &batch).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 1e-12, "loss was {loss}");
    }

    #[test]
    fn xavier_init_statistics() {
        let data = data_3c();
        let obj = mlp_objective(&[2, 16, 3], Arc::clone(&data)).unwrap();
        let mut rng = RngStream::new(11, 0);
        let w = obj.init_params(&mut rng);
        // Biases exactly zero.
        assert!(w.segment_values("b1").unwrap().iter().all(|&v| v == 0.0));
        assert!(w.segment_values("b2").unwrap().iter().all(|&v| v == 0.0));
        // Weights nonzero and on the right scale (loose sanity bound).
        let w1 = w.segment_values("w1").unwrap();
        let std = (2.0 / 18.0f64).sqrt();
        let rms = (w1.iter().map(|v| v * v).sum::<f64>() / w1.len() as f64).sqrt();
        assert!(rms > 0.3 * std && rms < 3.0 * std, "rms {rms} vs σ {std}");
    }

    #[test]
    fn rejects_bad_shapes() {
        let data = data_3c();
        assert!(mlp_objective(&[2], Arc::clone(&data)).is_err());
        assert!(mlp_objective(&[2, 0, 3], Arc::clone(&data)).is_err());
        // Feature/class mismatches.
        assert!(mlp_objective(&[5, 4, 3], Arc::clone(&data)).is_err());
        assert!(mlp_objective(&[2, 4, 5], data).is_err());
    }

    #[test]
    fn deterministic_eval_and_predict() {
        let data = data_3c();
        let obj = mlp_objective(&[2, 8, 3], Arc::clone(&data)).unwrap();
        let mut rng = RngStream::new(13, 0);
        let w = obj.init_params(&mut rng);
        let batch = Batch::new(data.dev().to_vec());
        assert_eq!(obj.eval(&w, &batch).unwrap(), obj.eval(&w, &batch).unwrap());
        assert_eq!(
            obj.predict(&w, &batch).unwrap().unwrap(),
            obj.predict(&w, &batch).unwrap().unwrap()
        );
    }
}
