//! Shared oracles for integration tests.
//!
//! The central finite-difference gradient here is deliberately independent
//! of the library's analytic gradients: it only calls `eval`, so agreement
//! between the two is evidence, not tautology.

use szo_core::objectives::{Batch, Objective};
use szo_core::param::ParamVector;

/// Central finite-difference gradient of `eval` with the given step.
pub fn fd_gradient(obj: &dyn Objective, w: &ParamVector, batch: &Batch, step: f64) -> Vec<f64> {
    let n = w.len();
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let mut plus = w.values().to_vec();
        let mut minus = plus.clone();
        plus[i] += step;
        minus[i] -= step;
        let fp = obj.eval(&w.with_values(plus).unwrap(), batch).unwrap();
        let fm = obj.eval(&w.with_values(minus).unwrap(), batch).unwrap();
        grad[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

/// Norm-relative error between two gradients: ‖a − b‖ / max(‖b‖, 1e-12).
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

/// Checks the analytic gradient against central finite differences at
/// `points` random-ish parameter vectors drawn from the objective's own
/// init plus scaled normal offsets; returns the worst relative error.
pub fn fd_check(
    obj: &dyn Objective,
    batch: &Batch,
    seed: u64,
    points: usize,
    step: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 0..points {
        let mut rng = szo_core::RngStream::new(seed, 1000 + p as u64);
        let base = obj.init_params(&mut rng);
        let offset = rng.sample_std_normal(obj.dim());
        let values: Vec<f64> =
            base.values().iter().zip(&offset).map(|(b, o)| b + 0.3 * o).collect();
        let w = base.with_values(values).unwrap();
        let analytic = obj.true_grad(&w, batch).unwrap();
        let numeric = fd_gradient(obj, &w, batch, step);
        worst = worst.max(rel_error(&numeric, &analytic));
    }
    worst
}
