//! Monte-Carlo checks of the estimator's statistical contract: on quadratic
//! objectives every kind is an unbiased estimate of the *masked* gradient
//! `m ⊙ ∇f(w)`, and averaging k samples shrinks the mean squared error
//! like 1/k.

use szo_core::estimators::{estimate_avg, estimate_single, EstimatorKind};
use szo_core::objectives::{quadratic_objective, Batch, Objective, QuadMatrix};
use szo_core::{Mask, ParamVector, RngStream};

fn test_problem() -> (impl Objective, ParamVector, Mask, Vec<f64>) {
    let n = 20;
    let diag: Vec<f64> = (0..n).map(|i| 0.5 + i as f64 * 0.15).collect();
    let b: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
    let obj = quadratic_objective(QuadMatrix::Diagonal(diag), b).unwrap();
    let w = ParamVector::flat((0..n).map(|i| 0.3 - 0.05 * i as f64).collect()).unwrap();
    let mask = Mask::from_indices(n, (0..n).step_by(2)).unwrap();
    let grad = obj.true_grad(&w, &Batch::empty()).unwrap();
    let masked_grad: Vec<f64> =
        grad.iter().enumerate().map(|(i, &g)| if mask.get(i) { g } else { 0.0 }).collect();
    (obj, w, mask, masked_grad)
}

/// Per-coordinate sample mean/SE over `samples` single-sample estimates.
fn mc_mean_se(
    obj: &dyn Objective,
    w: &ParamVector,
    mask: &Mask,
    kind: EstimatorKind,
    samples: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let mut sum = vec![0.0; n];
    let mut sumsq = vec![0.0; n];
    let mut rng = RngStream::new(seed, szo_core::rng::VERIFY_BASE);
    let batch = Batch::empty();
    for _ in 0..samples {
        let est = estimate_single(obj, w, &batch, mask, 0.05, kind, &mut rng).unwrap();
        for (i, g) in est.g.iter().enumerate() {
            sum[i] += g;
            sumsq[i] += g * g;
        }
    }
    let ns = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / ns).collect();
    let se: Vec<f64> = mean
        .iter()
        .zip(&sumsq)
        .map(|(m, sq)| ((sq / ns - m * m).max(0.0) / ns).sqrt())
        .collect();
    (mean, se)
}

#[test]
fn all_kinds_are_unbiased_for_the_masked_gradient() {
    let (obj, w, mask, masked_grad) = test_problem();
    let samples = 200_000;
    for (kind, seed) in [
        (EstimatorKind::OnePoint, 101),
        (EstimatorKind::TwoPoint, 102),
        (EstimatorKind::TwoSided, 103),
    ] {
        let (mean, se) = mc_mean_se(&obj, &w, &mask, kind, samples, seed);
        for i in 0..w.len() {
            if !mask.get(i) {
                assert_eq!(mean[i], 0.0, "masked coordinate {i} must stay exactly zero");
                continue;
            }
            let err = (mean[i] - masked_grad[i]).abs();
            assert!(
                err <= 5.0 * se[i].max(1e-12),
                "kind {kind:?}, coord {i}: |{} - {}| = {err} > 5·SE = {}",
                mean[i],
                masked_grad[i],
                5.0 * se[i]
            );
        }
    }
}

#[test]
fn averaging_shrinks_mse_like_one_over_k() {
    let (obj, w, mask, masked_grad) = test_problem();
    let batch = Batch::empty();
    let ks = [10usize, 100, 1000];
    let reps = 40;
    let mut log_mse = Vec::new();
    for (ki, &k) in ks.iter().enumerate() {
        let mut total = 0.0;
        for rep in 0..reps {
            let base = RngStream::new(200, szo_core::rng::VERIFY_BASE + (ki * reps + rep) as u64);
            let est =
                estimate_avg(&obj, &w, &batch, &mask, 0.05, EstimatorKind::TwoSided, k, &base)
                    .unwrap();
            let sq: f64 =
                est.g.iter().zip(&masked_grad).map(|(g, t)| (g - t) * (g - t)).sum();
            total += sq;
        }
        log_mse.push((total / reps as f64).ln());
    }
    // Least-squares slope of ln(mse) against ln(k); 1/k scaling gives −1.
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = log_mse.iter().sum::<f64>() / log_mse.len() as f64;
    let slope: f64 = xs
        .iter()
        .zip(&log_mse)
        .map(|(x, y)| (x - xm) * (y - ym))
        .sum::<f64>()
        / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
    assert!(
        (slope + 1.0).abs() < 0.2,
        "variance-reduction slope {slope} not within −1 ± 0.2 (log-mse {log_mse:?})"
    );
}
