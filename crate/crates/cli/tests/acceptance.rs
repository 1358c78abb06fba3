//! Acceptance gate: one test per advertised guarantee, each printing a
//! summary line (visible with `--nocapture`). Run with
//! `cargo test -p szo-cli --test acceptance`.

use std::collections::HashMap;
use std::fs;
use std::time::Instant;

use szo_cli::commands::{cmd_run, RunArgs};
use szo_core::estimators::EstimatorKind;
use szo_core::mask::Mask;
use szo_core::masking::{project_schedule, MaskSchedule};
use szo_core::metrics::ema;
use szo_core::objectives::{
    load_idx, logistic_objective, mlp_objective, sparse_quadratic_objective, synth_blobs, Batch,
    IdxData, Objective,
};
use szo_core::optimizer::{
    checkpoint_load, checkpoint_save, opt_step, run, run_from, theory_lr, LearningRate, OptConfig,
    OptState, RunOutput, StepDiagnostics, Variant,
};
use szo_core::param::ParamVector;
use szo_core::rng::{RngStream, DATA_BASE, VERIFY_BASE};
use szo_core::theorylab::{convergence_bound, mc_norm_moment, mc_unbiasedness};

// ---------------------------------------------------------------- helpers

/// Central finite-difference gradient using only `eval`; independent of the
/// library's analytic gradients.
fn fd_gradient(obj: &dyn Objective, w: &ParamVector, batch: &Batch, step: f64) -> Vec<f64> {
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

/// ‖a − b‖ / max(‖b‖, 1e-12).
fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

/// Worst norm-relative error of the analytic gradient against central
/// finite differences at `points` perturbed init draws.
fn fd_check(obj: &dyn Objective, batch: &Batch, seed: u64, points: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 0..points {
        let mut rng = RngStream::new(seed, VERIFY_BASE + 900 + p as u64);
        let base = obj.init_params(&mut rng);
        let offset = rng.sample_std_normal(obj.dim());
        let values: Vec<f64> =
            base.values().iter().zip(&offset).map(|(b, o)| b + 0.3 * o).collect();
        let w = base.with_values(values).unwrap();
        let analytic = obj.true_grad(&w, batch).unwrap();
        let numeric = fd_gradient(obj, &w, batch, 1e-5);
        worst = worst.max(rel_error(&numeric, &analytic));
    }
    worst
}

// -------------------------------------------------------------- criteria

#[test]
fn c01_masked_second_moment_matches_active_count_within_two_percent() {
    let started = Instant::now();
    let samples = 100_000;
    for (i, nbar) in [10usize, 50, 100].into_iter().enumerate() {
        let mask = Mask::from_indices(100, 0..nbar).unwrap();
        let rng = RngStream::new(11, VERIFY_BASE + i as u64);
        let report = mc_norm_moment(100, &mask, 2.0, samples, &rng).unwrap();
        let rel = (report.estimate - nbar as f64).abs() / nbar as f64;
        println!(
            "criterion 1: nbar={nbar} estimate={:.4} rel={:.5} se={:.5}",
            report.estimate, rel, report.standard_error
        );
        assert!(rel < 0.02, "nbar={nbar}: relative error {rel} >= 2%");
    }
    let elapsed = started.elapsed();
    println!("criterion 1: PASS in {elapsed:?}");
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
}

#[test]
fn c02_moment_bound_holds_and_fourth_moment_matches_exact_oracle() {
    let samples = 100_000;
    let mut stream = 100u64;
    for p in [3.0f64, 4.0, 6.0] {
        for nbar in [1usize, 10, 50] {
            stream += 1;
            let mask = Mask::from_indices(50, 0..nbar).unwrap();
            let rng = RngStream::new(12, VERIFY_BASE + stream);
            let report = mc_norm_moment(50, &mask, p, samples, &rng).unwrap();
            assert!(
                !report.violation,
                "p={p} nbar={nbar}: estimate {} − 3·SE {} exceeds bound {}",
                report.estimate, report.standard_error, report.bound
            );
            if p == 4.0 {
                // Exact fourth moment of the masked squared norm.
                let exact = (nbar * (nbar + 2)) as f64;
                let dev = (report.estimate - exact).abs();
                println!(
                    "criterion 2: p=4 nbar={nbar} estimate={:.3} exact={exact} dev/se={:.2}",
                    report.estimate,
                    dev / report.standard_error
                );
                assert!(
                    dev <= 3.0 * report.standard_error,
                    "p=4 nbar={nbar}: |{} − {exact}| > 3·{}",
                    report.estimate,
                    report.standard_error
                );
            }
        }
    }
    println!("criterion 2: PASS (9 bound cells, 3 exact cells)");
}

#[test]
fn c03_difference_estimators_are_unbiased_for_the_masked_gradient() {
    let active: Vec<usize> = (0..20).collect();
    let quad = sparse_quadratic_objective(20, &active, 1.0).unwrap();
    let w = quad.init_params(&mut RngStream::new(13, VERIFY_BASE + 300));
    let mask = Mask::from_indices(20, (0..20).step_by(2)).unwrap();
    for (i, kind) in [EstimatorKind::TwoPoint, EstimatorKind::TwoSided].into_iter().enumerate() {
        let rng = RngStream::new(13, VERIFY_BASE + 310 + i as u64);
        let report = mc_unbiasedness(&quad, &w, &mask, 0.05, kind, 200_000, &rng).unwrap();
        println!(
            "criterion 3: {kind:?} max deviation = {:.3} standard errors",
            report.max_deviation_se
        );
        assert!(
            report.max_deviation_se < 5.0,
            "{kind:?}: worst coordinate off by {} SE",
            report.max_deviation_se
        );
        for i in (1..20).step_by(2) {
            assert_eq!(report.mean[i], 0.0, "masked coordinate {i} must be exactly 0");
            assert_eq!(report.expected[i], 0.0);
        }
    }
    println!("criterion 3: PASS");
}

#[test]
fn c04_projected_schedule_lands_in_the_expected_brackets() {
    let small = project_schedule(266_610, 0.8, 19);
    let large = project_schedule(4_301_642, 0.8, 19);
    println!("criterion 4: 266,610 -> {small}; 4,301,642 -> {large}");
    assert!((3842..=3846).contains(&small), "got {small}");
    assert!((61_994..=61_998).contains(&large), "got {large}");
    println!("criterion 4: PASS");
}

#[test]
fn c05_analytic_gradients_match_central_finite_differences() {
    let mut rng = RngStream::new(14, DATA_BASE);
    let mlp_data =
        std::sync::Arc::new(synth_blobs(&mut rng, 3, 2, 30, 0.6).unwrap());
    let mlp = mlp_objective(&[2, 16, 3], mlp_data.clone()).unwrap();
    let mlp_batch = Batch::new(mlp_data.train().to_vec());
    let worst_mlp = fd_check(&mlp, &mlp_batch, 14, 20);

    let mut rng = RngStream::new(15, DATA_BASE);
    let log_data =
        std::sync::Arc::new(synth_blobs(&mut rng, 3, 5, 20, 0.6).unwrap());
    let logistic = logistic_objective(log_data.clone(), 3, 0.001).unwrap();
    let log_batch = Batch::new(log_data.train().to_vec());
    let worst_log = fd_check(&logistic, &log_batch, 15, 20);

    println!("criterion 5: worst rel error mlp={worst_mlp:.2e} logistic={worst_log:.2e}");
    assert!(worst_mlp < 1e-5, "mlp worst relative error {worst_mlp}");
    assert!(worst_log < 1e-5, "logistic worst relative error {worst_log}");
    println!("criterion 5: PASS");
}

/// Shared setup for the convergence-advantage criterion: a 200-dim
/// quadratic whose gradient lives on 10 coordinates, optimized with the
/// analytic step size so a shrinking mask buys a larger step.
fn advantage_config(variant: Variant, seed: u64) -> OptConfig {
    OptConfig {
        variant,
        kind: EstimatorKind::TwoSided,
        mu: 0.05,
        k: 10,
        learning_rate: LearningRate::Theory,
        schedule: MaskSchedule::new(60, 0.8, 5).unwrap(),
        batch_size: 1,
        total_steps: 2600,
        seed,
        candidates: 1,
        eval_interval: 0,
        neighbor_samples: 1,
        neighbor_half_range: 0.5,
    }
}

/// First logged feval count at which the loss reaches `threshold`.
fn fevals_to(output: &RunOutput, threshold: f64) -> Option<u64> {
    output.record.rows.iter().find(|r| r.train_loss <= threshold).map(|r| r.fevals)
}

#[test]
fn c06_freezing_reaches_the_target_with_at_least_30_percent_fewer_evals() {
    let started = Instant::now();
    let active: Vec<usize> = (0..10).collect();
    let objective = sparse_quadratic_objective(200, &active, 1.0).unwrap();
    let f_star = objective.optimal_value().unwrap();
    let mut savings = Vec::new();
    for seed in 1u64..=5 {
        // Start strictly positive so the active coordinates (pulled toward
        // +2.5) never cross zero, where a magnitude cut could drop them.
        let mut rng = RngStream::new(seed, VERIFY_BASE + 600);
        let values: Vec<f64> =
            rng.sample_std_normal(200).iter().map(|z| 0.1 + 0.3 * z.abs()).collect();
        let w0 = ParamVector::new(values, objective.layout().clone()).unwrap();
        let start = || OptState {
            w: w0.clone(),
            m: Mask::all_ones(200),
            step: 0,
            events_fired: 0,
            master_seed: seed,
        };

        let dense =
            run_from(&advantage_config(Variant::Dense, seed), &objective, start()).unwrap();
        let freeze =
            run_from(&advantage_config(Variant::FreezeMagnitude, seed), &objective, start())
                .unwrap();

        let f0 = dense.record.rows[0].train_loss;
        assert_eq!(f0, freeze.record.rows[0].train_loss, "shared start point");
        let threshold = f_star + 0.01 * (f0 - f_star);
        let fe_dense = fevals_to(&dense, threshold)
            .unwrap_or_else(|| panic!("seed {seed}: dense never reached {threshold}"));
        let fe_freeze = fevals_to(&freeze, threshold)
            .unwrap_or_else(|| panic!("seed {seed}: freeze never reached {threshold}"));
        let saving = 1.0 - fe_freeze as f64 / fe_dense as f64;
        println!(
            "criterion 6: seed {seed}: dense {fe_dense} vs freeze {fe_freeze} fevals \
             (saving {:.1}%)",
            saving * 100.0
        );
        savings.push(saving);
    }
    savings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = savings[2];
    let elapsed = started.elapsed();
    println!("criterion 6: median saving {:.1}% in {elapsed:?}", median * 100.0);
    assert!(median >= 0.30, "median feval saving {median} below 30%");
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 1 min");
    println!("criterion 6: PASS");
}

#[test]
fn c07_freezing_shrinks_gradient_distance_once_density_is_low() {
    let mut rng = RngStream::new(7, DATA_BASE);
    let data = std::sync::Arc::new(synth_blobs(&mut rng, 10, 64, 60, 2.0).unwrap());
    let objective = mlp_objective(&[64, 32, 10], data).unwrap();
    assert_eq!(objective.dim(), 2410);
    let config = |variant: Variant, seed: u64| OptConfig {
        variant,
        kind: EstimatorKind::TwoSided,
        mu: 0.05,
        k: 10,
        learning_rate: LearningRate::Fixed(0.1),
        schedule: MaskSchedule::new(50, 0.8, 10).unwrap(),
        batch_size: 32,
        total_steps: 600,
        seed,
        candidates: 1,
        eval_interval: 0,
        neighbor_samples: 1,
        neighbor_half_range: 0.5,
    };

    let seeds = [1u64, 2, 3];
    let mut dense_emas: Vec<Vec<f64>> = Vec::new();
    let mut freeze_emas: Vec<Vec<f64>> = Vec::new();
    let mut start_idx = 0usize;
    for &seed in &seeds {
        let dense = run(&config(Variant::Dense, seed), &objective).unwrap();
        let freeze = run(&config(Variant::FreezeMagnitude, seed), &objective).unwrap();
        let series = |output: &RunOutput| -> Vec<f64> {
            output.record.rows.iter().map(|r| r.grad_dist.expect("step rows")).collect()
        };
        dense_emas.push(ema(&series(&dense), 0.99));
        freeze_emas.push(ema(&series(&freeze), 0.99));
        // First step whose (post-event) mask keeps under 20% of coords.
        let idx = freeze
            .record
            .rows
            .iter()
            .position(|r| r.sparsity > 0.8)
            .expect("density never dropped below 20%");
        start_idx = start_idx.max(idx);
    }

    let steps = dense_emas[0].len();
    let mean = |curves: &Vec<Vec<f64>>, i: usize| -> f64 {
        curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64
    };
    let mut below = 0usize;
    let mut total = 0usize;
    for i in start_idx..steps {
        total += 1;
        if mean(&freeze_emas, i) < mean(&dense_emas, i) {
            below += 1;
        }
    }
    let frac = below as f64 / total as f64;
    println!(
        "criterion 7: smoothed grad_dist of freezing below dense at {below}/{total} \
         ({:.1}%) of steps past density<20% (from step {start_idx})",
        frac * 100.0
    );
    for (i, &seed) in seeds.iter().enumerate() {
        let per_seed = (start_idx..steps)
            .filter(|&j| freeze_emas[i][j] < dense_emas[i][j])
            .count();
        println!(
            "criterion 7: seed {seed}: {per_seed}/{} steps below",
            steps - start_idx
        );
    }
    assert!(frac >= 0.9, "only {:.1}% of steps below", frac * 100.0);
    println!("criterion 7: PASS");
}

#[test]
fn c08_masked_coordinates_freeze_bitwise_or_prune_to_exact_zero() {
    let active: Vec<usize> = (0..8).collect();
    let objective = sparse_quadratic_objective(40, &active, 1.0).unwrap();
    let base = OptConfig {
        variant: Variant::FreezeMagnitude,
        kind: EstimatorKind::TwoSided,
        mu: 0.05,
        k: 4,
        learning_rate: LearningRate::Fixed(0.05),
        schedule: MaskSchedule::new(10, 0.6, 3).unwrap(),
        batch_size: 1,
        total_steps: 45,
        seed: 21,
        candidates: 1,
        eval_interval: 0,
        neighbor_samples: 1,
        neighbor_half_range: 0.5,
    };

    // Freezing: every masked coordinate keeps its exact bit pattern from
    // the moment it was masked, for the rest of the run.
    let mut state = OptState::init(&objective, &base);
    let mut diag = StepDiagnostics::for_objective(&objective);
    let mut frozen: HashMap<usize, u64> = HashMap::new();
    while state.step < base.total_steps {
        opt_step(&mut state, &objective, &Batch::empty(), &base, &mut diag).unwrap();
        for i in 0..state.m.len() {
            if !state.m.get(i) {
                let bits = state.w.values()[i].to_bits();
                match frozen.get(&i) {
                    None => {
                        frozen.insert(i, bits);
                    }
                    Some(&expected) => {
                        assert_eq!(bits, expected, "frozen coordinate {i} moved");
                    }
                }
            } else {
                assert!(!frozen.contains_key(&i), "coordinate {i} left the mask");
            }
        }
    }
    assert_eq!(state.events_fired, 3);
    assert!(!frozen.is_empty());
    println!("criterion 8: {} frozen coordinates bit-constant over 45 steps", frozen.len());

    // Pruning: masked coordinates are exactly zero from their event on.
    let prune = OptConfig { variant: Variant::PruneMagnitude, ..base.clone() };
    let mut state = OptState::init(&objective, &prune);
    let mut diag = StepDiagnostics::for_objective(&objective);
    let mut pruned_seen = false;
    while state.step < prune.total_steps {
        opt_step(&mut state, &objective, &Batch::empty(), &prune, &mut diag).unwrap();
        for i in 0..state.m.len() {
            if !state.m.get(i) {
                pruned_seen = true;
                assert_eq!(state.w.values()[i], 0.0, "pruned coordinate {i} is nonzero");
                assert_eq!(state.w.values()[i].to_bits(), 0u64, "negative zero leaked in");
            }
        }
    }
    assert!(pruned_seen);

    // Dense and freeze-with-zero-events produce bit-identical runs.
    let mut rng = RngStream::new(8, DATA_BASE);
    let data = std::sync::Arc::new(synth_blobs(&mut rng, 3, 8, 30, 1.0).unwrap());
    let logistic = logistic_objective(data, 3, 0.0).unwrap();
    let dense_cfg = OptConfig {
        variant: Variant::Dense,
        schedule: MaskSchedule::new(10, 0.6, 0).unwrap(),
        batch_size: 8,
        total_steps: 25,
        seed: 22,
        ..base.clone()
    };
    let freeze0_cfg = OptConfig { variant: Variant::FreezeMagnitude, ..dense_cfg.clone() };
    let dense = run(&dense_cfg, &logistic).unwrap();
    let freeze0 = run(&freeze0_cfg, &logistic).unwrap();
    assert_eq!(dense.record.rows, freeze0.record.rows);
    let dense_bits: Vec<u64> = dense.state.w.values().iter().map(|x| x.to_bits()).collect();
    let freeze_bits: Vec<u64> = freeze0.state.w.values().iter().map(|x| x.to_bits()).collect();
    assert_eq!(dense_bits, freeze_bits);
    assert_eq!(dense.state.m, freeze0.state.m);
    println!("criterion 8: PASS");
}

#[test]
fn c09_runs_are_byte_deterministic_and_formats_round_trip() {
    // Identical seed and config → byte-identical CSV through the CLI.
    let dir = tempfile::tempdir().unwrap();
    let sets: Vec<String> = [
        "objective=sparse_quadratic",
        "quad_dim=30",
        "quad_active=5",
        "total_steps=30",
        "k=4",
        "batch=4",
        "lr=0.1",
        "interval_steps=10",
        "max_events=2",
        "keep=0.5",
        "variant=freezeL1",
        "seeds=17",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for out in ["a", "b"] {
        cmd_run(&RunArgs {
            config: None,
            seed: None,
            out: Some(dir.path().join(out)),
            set: sets.clone(),
        })
        .unwrap();
    }
    let csv_a = fs::read(dir.path().join("a/run_17.csv")).unwrap();
    let csv_b = fs::read(dir.path().join("b/run_17.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b, "same seed must give byte-identical CSVs");

    // IDX acceptance and rejection.
    let idx = |magic: u32, dims: &[u32], payload: &[u8]| -> Vec<u8> {
        let mut bytes = magic.to_be_bytes().to_vec();
        for d in dims {
            bytes.extend_from_slice(&d.to_be_bytes());
        }
        bytes.extend_from_slice(payload);
        bytes
    };
    let images_path = dir.path().join("images.idx");
    fs::write(&images_path, idx(2051, &[2, 3, 3], &[7u8; 18])).unwrap();
    match load_idx(&images_path).unwrap() {
        IdxData::Images { dims, pixels } => {
            assert_eq!(dims, vec![2, 3, 3]);
            assert_eq!(pixels.len(), 18);
        }
        other => panic!("expected images, got {other:?}"),
    }
    let labels_path = dir.path().join("labels.idx");
    fs::write(&labels_path, idx(2049, &[4], &[0, 1, 2, 3])).unwrap();
    assert!(matches!(load_idx(&labels_path).unwrap(), IdxData::Labels(l) if l == vec![0, 1, 2, 3]));
    let bad_path = dir.path().join("bad.idx");
    fs::write(&bad_path, idx(2050, &[2, 3, 3], &[7u8; 18])).unwrap();
    let err = load_idx(&bad_path).unwrap_err();
    assert!(
        matches!(err, szo_core::SzoError::Format(_)),
        "corrupted magic must be a format error, got {err}"
    );

    // Checkpoint save → load → save round-trips bytes exactly.
    let active: Vec<usize> = (0..5).collect();
    let quad = sparse_quadratic_objective(20, &active, 1.0).unwrap();
    let cfg = OptConfig {
        variant: Variant::FreezeMagnitude,
        kind: EstimatorKind::TwoSided,
        mu: 0.05,
        k: 3,
        learning_rate: LearningRate::Fixed(0.05),
        schedule: MaskSchedule::new(5, 0.6, 2).unwrap(),
        batch_size: 1,
        total_steps: 12,
        seed: 23,
        candidates: 1,
        eval_interval: 0,
        neighbor_samples: 1,
        neighbor_half_range: 0.5,
    };
    let output = run(&cfg, &quad).unwrap();
    let p1 = dir.path().join("state1.bin");
    let p2 = dir.path().join("state2.bin");
    checkpoint_save(&output.state, &p1).unwrap();
    let loaded = checkpoint_load(&p1).unwrap();
    assert_eq!(loaded, output.state);
    checkpoint_save(&loaded, &p2).unwrap();
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    println!("criterion 9: PASS");
}

#[test]
fn c10_step_size_and_bound_arithmetic_are_exact_and_monotone() {
    assert_eq!(theory_lr(4, 1.0).unwrap(), 1.0 / 32.0, "analytic step size must be exact");

    let bound = |nhat: f64, l: f64, mu: f64, t: u64| {
        convergence_bound(nhat, l, 1.0, t, mu).unwrap()
    };
    let mut violations = 0usize;
    let mut pairs = 0usize;
    let mut check = |values: Vec<f64>, increasing: bool, label: &str| {
        for w in values.windows(2) {
            pairs += 1;
            let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
            if !ok {
                violations += 1;
                println!("criterion 10: violation in {label}: {} then {}", w[0], w[1]);
            }
        }
    };
    check(
        [1.0, 2.0, 5.0, 10.0, 50.0, 100.0].iter().map(|&n| bound(n, 1.0, 0.05, 100)).collect(),
        true,
        "active-count growth",
    );
    check(
        [0.25, 0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|&l| bound(10.0, l, 0.05, 100)).collect(),
        true,
        "smoothness growth",
    );
    check(
        [0.01, 0.02, 0.05, 0.1, 0.2].iter().map(|&mu| bound(10.0, 1.0, mu, 100)).collect(),
        true,
        "perturbation growth",
    );
    check(
        [0u64, 1, 10, 100, 1000, 10_000].iter().map(|&t| bound(10.0, 1.0, 0.05, t)).collect(),
        false,
        "horizon decay",
    );
    println!("criterion 10: {pairs} ordered pairs, {violations} violations");
    assert_eq!(violations, 0);
    println!("criterion 10: PASS");
}
