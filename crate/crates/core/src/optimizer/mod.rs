//! The descent loop: smoothed zeroth-order steps over shuffled minibatches,
//! with scheduled sparsification events that either *freeze* masked
//! coordinates (they keep their value, the estimator never perturbs them)
//! or *prune* them (the weight is zeroed at the event and stays zero).
//!
//! # Determinism
//!
//! Every random decision derives from `(master_seed, purpose, index)` via
//! the stream layout in [`crate::rng`]: initialization, one shuffle stream
//! per epoch, one stream per sparsification event, one per-step base stream
//! for the estimator samples, and one per eval row for the neighborhood
//! probe. Nothing depends on wall clock, thread count, or iteration order,
//! so a run is bit-reproducible from `(config, seed)` alone, and a resumed
//! run replays the exact batch sequence of an uninterrupted one.
//!
//! # Row semantics
//!
//! Step `t` logs its row *before* the update: the loss and true gradient at
//! the point the estimate was drawn (after any same-step event), on the
//! step's own minibatch. `examples_seen` and `fevals` are computed from `t`
//! alone, so they are identical across resumes.

mod checkpoint;

pub use checkpoint::{checkpoint_load, checkpoint_save};

use crate::error::{Result, SzoError};
use crate::estimators::{estimate_avg, EstimatorKind};
use crate::mask::{apply_mask_inplace, Mask};
use crate::masking::{
    magnitude_mask, random_mask_select, should_sparsify, MaskSchedule,
};
use crate::metrics::{
    accuracy, grad_distance, lipschitz_local, lipschitz_neighbor, MetricsRow, RunMeta, RunRecord,
};
use crate::objectives::{Batch, Objective};
use crate::param::ParamVector;
use crate::rng::{
    RngStream, ESTIMATOR_BASE, INIT_STREAM, MASK_EVENT_BASE, NEIGHBOR_BASE, SHUFFLE_BASE,
};

/// How sparsification events act on the weights, and how new masks are
/// chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Never fires events; the mask stays all-ones.
    Dense,
    /// Magnitude-chosen mask; masked coordinates keep their current value.
    FreezeMagnitude,
    /// Candidate-sampled mask; masked coordinates keep their current value.
    FreezeRandom,
    /// Magnitude-chosen mask; masked coordinates are zeroed at the event.
    PruneMagnitude,
    /// Candidate-sampled mask; masked coordinates are zeroed at the event.
    PruneRandom,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Dense,
        Variant::FreezeMagnitude,
        Variant::FreezeRandom,
        Variant::PruneMagnitude,
        Variant::PruneRandom,
    ];

    /// Stable config/CSV token.
    pub fn token(self) -> &'static str {
        match self {
            Variant::Dense => "dense",
            Variant::FreezeMagnitude => "freezeL1",
            Variant::FreezeRandom => "freezeRand",
            Variant::PruneMagnitude => "pruneL1",
            Variant::PruneRandom => "pruneRand",
        }
    }

    pub fn from_token(token: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.token() == token)
            .ok_or_else(|| {
                SzoError::Domain(format!(
                    "unknown variant {token:?}; expected one of dense, freezeL1, freezeRand, \
                     pruneL1, pruneRand"
                ))
            })
    }

    pub fn fires_events(self) -> bool {
        self != Variant::Dense
    }

    pub fn prunes(self) -> bool {
        matches!(self, Variant::PruneMagnitude | Variant::PruneRandom)
    }

    fn uses_magnitude(self) -> bool {
        matches!(self, Variant::FreezeMagnitude | Variant::PruneMagnitude)
    }
}

/// Step-size policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Fixed(f64),
    /// `h^(t) = 1/(4(n̄^(t)+4)·L̂)` with `L̂` the running max of the local
    /// Lipschitz secants, seeded from the objective's hint when available.
    Theory,
}

/// Full description of a run. `eval_interval = 0` disables the periodic
/// test-accuracy / neighborhood-probe rows.
#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    pub variant: Variant,
    pub kind: EstimatorKind,
    pub mu: f64,
    pub k: usize,
    pub learning_rate: LearningRate,
    pub schedule: MaskSchedule,
    pub batch_size: usize,
    pub total_steps: u64,
    pub seed: u64,
    /// Candidate masks per event for the random variants.
    pub candidates: usize,
    pub eval_interval: u64,
    pub neighbor_samples: usize,
    pub neighbor_half_range: f64,
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu <= 0.0 {
            return Err(SzoError::Domain(format!("mu must be positive, got {}", self.mu)));
        }
        if self.k == 0 {
            return Err(SzoError::Domain("k must be at least 1".into()));
        }
        if let LearningRate::Fixed(h) = self.learning_rate {
            if !(h > 0.0) {
                return Err(SzoError::Domain(format!(
                    "fixed learning rate must be positive, got {h}"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(SzoError::Domain("batch_size must be at least 1".into()));
        }
        if self.candidates == 0 {
            return Err(SzoError::Domain("candidates must be at least 1".into()));
        }
        if self.neighbor_samples == 0 {
            return Err(SzoError::Domain("neighbor_samples must be at least 1".into()));
        }
        if !(self.neighbor_half_range > 0.0) {
            return Err(SzoError::Domain(format!(
                "neighbor_half_range must be positive, got {}",
                self.neighbor_half_range
            )));
        }
        MaskSchedule::new(
            self.schedule.interval_steps,
            self.schedule.keep_fraction,
            self.schedule.max_events,
        )?;
        Ok(())
    }

    /// FNV-1a hash of the canonical field printout, for run metadata.
    pub fn digest(&self) -> String {
        let canon = format!(
            "variant={};kind={:?};mu={};k={};lr={:?};interval={};keep={};max_events={};\
             batch={};steps={};seed={};candidates={};eval_interval={};neighbor_samples={};\
             neighbor_half_range={}",
            self.variant.token(),
            self.kind,
            self.mu,
            self.k,
            self.learning_rate,
            self.schedule.interval_steps,
            self.schedule.keep_fraction,
            self.schedule.max_events,
            self.batch_size,
            self.total_steps,
            self.seed,
            self.candidates,
            self.eval_interval,
            self.neighbor_samples,
            self.neighbor_half_range,
        );
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in canon.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

/// The checkpointable core of a run: everything needed to continue it.
/// Loop-local diagnostics (running Lipschitz max, previous iterate) are
/// deliberately not part of this state; see [`checkpoint_save`] for the
/// persistence caveats.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub w: ParamVector,
    pub m: Mask,
    pub step: u64,
    pub events_fired: u64,
    pub master_seed: u64,
}

impl OptState {
    /// Fresh state at step 0: drawn initial weights, all-ones mask.
    pub fn init(objective: &dyn Objective, config: &OptConfig) -> OptState {
        let mut rng = RngStream::new(config.seed, INIT_STREAM);
        OptState {
            w: objective.init_params(&mut rng),
            m: Mask::all_ones(objective.dim()),
            step: 0,
            events_fired: 0,
            master_seed: config.seed,
        }
    }
}

/// Diagnostics threaded between steps: previous estimate point and its
/// batch gradient (for the local Lipschitz secant), the running Lipschitz
/// max for the theory step size, and the loss accumulator.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    prev_point: Option<(Vec<f64>, Vec<f64>)>,
    lhat: f64,
    cum_loss: f64,
    first_row: bool,
}

impl StepDiagnostics {
    /// `initial_l` seeds the running Lipschitz max — the objective's hint,
    /// or 1.0 when it has none (the running max takes over from the first
    /// measurable secant).
    pub fn new(initial_l: f64) -> StepDiagnostics {
        StepDiagnostics { prev_point: None, lhat: initial_l.max(f64::MIN_POSITIVE), cum_loss: 0.0, first_row: true }
    }

    pub fn for_objective(objective: &dyn Objective) -> StepDiagnostics {
        StepDiagnostics::new(objective.lipschitz_hint().unwrap_or(1.0))
    }

    /// Current running Lipschitz estimate.
    pub fn lhat(&self) -> f64 {
        self.lhat
    }
}

/// `1/(4(n̄+4)L)` — the analytic step size for the current active count.
pub fn theory_lr(nbar: usize, l_const: f64) -> Result<f64> {
    if !(l_const > 0.0) {
        return Err(SzoError::Domain(format!("L must be positive, got {l_const}")));
    }
    Ok(1.0 / (4.0 * (nbar as f64 + 4.0) * l_const))
}

/// Examples consumed by steps `0..=t` when batches cycle through
/// `train_len` examples in epochs of `batch_size` (last batch short).
fn examples_seen_through(t: u64, train_len: usize, batch_size: usize) -> u64 {
    if train_len == 0 {
        return 0;
    }
    let epoch_len = train_len.div_ceil(batch_size) as u64;
    let full_epochs = t / epoch_len;
    let pos = t % epoch_len;
    full_epochs * train_len as u64
        + (((pos + 1) * batch_size as u64).min(train_len as u64))
}

/// The minibatch for absolute step `t`: position `t mod epoch_len` within
/// the epoch-`t/epoch_len` shuffle of the train split. Stateless in `t`, so
/// resumed runs replay the identical sequence.
fn batch_for_step(
    objective: &dyn Objective,
    config: &OptConfig,
    t: u64,
) -> Batch {
    let Some(data) = objective.dataset() else {
        return Batch::empty();
    };
    let train = data.train();
    if train.is_empty() {
        return Batch::empty();
    }
    let epoch_len = train.len().div_ceil(config.batch_size) as u64;
    let epoch = t / epoch_len;
    let pos = (t % epoch_len) as usize;
    let mut order = train.to_vec();
    let mut rng = RngStream::new(config.seed, SHUFFLE_BASE + epoch);
    rng.shuffle(&mut order);
    let start = pos * config.batch_size;
    let end = (start + config.batch_size).min(order.len());
    Batch::new(order[start..end].to_vec())
}

fn fire_event(
    state: &mut OptState,
    objective: &dyn Objective,
    config: &OptConfig,
) -> Result<()> {
    let event_index = state.events_fired;
    let new_mask = if config.variant.uses_magnitude() {
        magnitude_mask(&state.w, &state.m, config.schedule.keep_fraction)?
    } else {
        let base = RngStream::new(config.seed, MASK_EVENT_BASE + event_index);
        let dev: Option<Vec<usize>> = objective
            .dataset()
            .map(|d| d.dev().to_vec())
            .filter(|split| !split.is_empty());
        let scores_by_accuracy = match &dev {
            Some(split) => objective
                .predict(&state.w, &Batch::new(vec![split[0]]))?
                .is_some(),
            None => false,
        };
        let w = &state.w;
        random_mask_select(
            &state.m,
            config.schedule.keep_fraction,
            config.candidates,
            |candidate: &Mask| {
                // Candidate scoring zeroes weights outside the candidate for
                // evaluation only; the live weights are untouched.
                let mut masked = w.values().to_vec();
                apply_mask_inplace(candidate, &mut masked)?;
                let masked = w.with_values(masked)?;
                match &dev {
                    Some(split) if scores_by_accuracy => accuracy(objective, &masked, split),
                    Some(split) => {
                        objective.eval(&masked, &Batch::new(split.clone())).map(|f| -f)
                    }
                    None => objective.eval(&masked, &Batch::empty()).map(|f| -f),
                }
            },
            &base,
        )?
    };
    state.m = new_mask;
    state.events_fired += 1;
    if config.variant.prunes() {
        apply_mask_inplace(&state.m, state.w.values_mut())?;
    }
    log::debug!(
        "sparsification event {} at step {}: {} active of {}",
        state.events_fired,
        state.step,
        state.m.nbar(),
        state.m.len()
    );
    Ok(())
}

/// One full optimizer step at `state.step`: fire a due sparsification
/// event, draw the averaged estimate, log the pre-update row, and take the
/// gradient step. Returns the row; `state.step` advances by one.
pub fn opt_step(
    state: &mut OptState,
    objective: &dyn Objective,
    batch: &Batch,
    config: &OptConfig,
    diag: &mut StepDiagnostics,
) -> Result<MetricsRow> {
    let t = state.step;
    if config.variant.fires_events()
        && should_sparsify(t, &config.schedule, state.events_fired)
    {
        fire_event(state, objective, config)?;
    }

    let base = RngStream::new(config.seed, ESTIMATOR_BASE + t);
    let estimate = estimate_avg(
        objective,
        &state.w,
        batch,
        &state.m,
        config.mu,
        config.kind,
        config.k,
        &base,
    )?;

    let train_loss = objective.eval(&state.w, batch)?;
    if !train_loss.is_finite() {
        return Err(SzoError::NonFinite {
            context: format!("training loss at step {t}"),
            at: Some(state.w.values().to_vec()),
        });
    }
    let grad = objective.true_grad(&state.w, batch)?;
    let grad_dist = grad_distance(&estimate.g, &grad)?;

    let l_local = diag.prev_point.as_ref().and_then(|(pw, pg)| {
        lipschitz_local(pw, state.w.values(), pg, &grad)
    });
    if let Some(l) = l_local {
        diag.lhat = diag.lhat.max(l);
    }

    let (l_neighbor, test_acc) = if config.eval_interval > 0 && t % config.eval_interval == 0 {
        let eval_batch = match objective.dataset() {
            Some(data) if !data.test().is_empty() => Batch::new(data.test().to_vec()),
            _ => Batch::empty(),
        };
        let mut neighbor_rng = RngStream::new(config.seed, NEIGHBOR_BASE + t);
        let ln = lipschitz_neighbor(
            objective,
            &state.w,
            &eval_batch,
            &mut neighbor_rng,
            config.neighbor_samples,
            config.neighbor_half_range,
        )?;
        let acc = match objective.dataset() {
            Some(data) if !data.test().is_empty() => {
                match objective.predict(&state.w, &Batch::new(vec![data.test()[0]]))? {
                    Some(_) => Some(accuracy(objective, &state.w, data.test())?),
                    None => None,
                }
            }
            _ => None,
        };
        (Some(ln), acc)
    } else {
        (None, None)
    };

    diag.cum_loss = if diag.first_row { train_loss } else { diag.cum_loss + train_loss };
    diag.first_row = false;

    let (train_len, batch_size) = match objective.dataset() {
        Some(data) => (data.train().len(), config.batch_size),
        None => (0, config.batch_size),
    };
    let row = MetricsRow {
        step: t,
        examples_seen: examples_seen_through(t, train_len, batch_size),
        fevals: (t + 1) * (config.k as u64) * (config.kind.evals_per_sample() as u64),
        sparsity: 1.0 - state.m.nbar() as f64 / state.m.len() as f64,
        train_loss,
        cum_loss: diag.cum_loss,
        grad_dist: Some(grad_dist),
        l_local,
        l_neighbor,
        test_acc,
    };

    let h = match config.learning_rate {
        LearningRate::Fixed(h) => h,
        LearningRate::Theory => theory_lr(state.m.nbar(), diag.lhat)?,
    };
    diag.prev_point = Some((state.w.values().to_vec(), grad));
    for (w, g) in state.w.values_mut().iter_mut().zip(&estimate.g) {
        *w -= h * g;
    }
    state.step += 1;
    Ok(row)
}

/// A completed run: its rows and the final checkpointable state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record: RunRecord,
    pub state: OptState,
}

/// A failed run: the error, plus everything produced before it for
/// flushing (partial rows and the state at failure).
#[derive(Debug)]
pub struct RunFailure {
    pub error: SzoError,
    pub partial: RunRecord,
    pub state: OptState,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run failed at step {}: {}", self.state.step, self.error)
    }
}

impl std::error::Error for RunFailure {}

fn evaluation_only_row(
    state: &OptState,
    objective: &dyn Objective,
    config: &OptConfig,
) -> Result<MetricsRow> {
    let batch = batch_for_step(objective, config, 0);
    let train_loss = objective.eval(&state.w, &batch)?;
    let test_acc = match objective.dataset() {
        Some(data) if !data.test().is_empty() => {
            match objective.predict(&state.w, &Batch::new(vec![data.test()[0]]))? {
                Some(_) => Some(accuracy(objective, &state.w, data.test())?),
                None => None,
            }
        }
        _ => None,
    };
    Ok(MetricsRow {
        step: 0,
        examples_seen: 0,
        fevals: 0,
        sparsity: 1.0 - state.m.nbar() as f64 / state.m.len() as f64,
        train_loss,
        cum_loss: train_loss,
        grad_dist: None,
        l_local: None,
        l_neighbor: None,
        test_acc,
    })
}

/// Runs `config.total_steps` steps from `start`, appending to a fresh
/// record. Cumulative loss and the running Lipschitz max restart at the
/// resume point; everything else (batches, masks, estimates, weights)
/// continues exactly as an uninterrupted run would.
pub fn run_from(
    config: &OptConfig,
    objective: &dyn Objective,
    start: OptState,
) -> std::result::Result<RunOutput, RunFailure> {
    let mut state = start;
    let meta = RunMeta {
        config_hash: config.digest(),
        seed: config.seed,
        objective_id: objective.id(),
    };
    let mut record = RunRecord::new(meta);
    let mut diag = StepDiagnostics::for_objective(objective);

    let fail = |error: SzoError, record: RunRecord, state: OptState| RunFailure {
        error,
        partial: record,
        state,
    };

    if let Err(error) = config.validate() {
        return Err(fail(error, record, state));
    }
    if state.w.len() != objective.dim() || state.m.len() != objective.dim() {
        return Err(fail(
            SzoError::DimensionMismatch { expected: objective.dim(), got: state.w.len() },
            record,
            state,
        ));
    }

    if config.total_steps == 0 && state.step == 0 {
        match evaluation_only_row(&state, objective, config) {
            Ok(row) => {
                if let Err(error) = record.push(row) {
                    return Err(fail(error, record, state));
                }
            }
            Err(error) => return Err(fail(error, record, state)),
        }
        return Ok(RunOutput { record, state });
    }

    while state.step < config.total_steps {
        let batch = batch_for_step(objective, config, state.step);
        match opt_step(&mut state, objective, &batch, config, &mut diag) {
            Ok(row) => {
                if let Err(error) = record.push(row) {
                    return Err(fail(error, record, state));
                }
            }
            Err(error) => return Err(fail(error, record, state)),
        }
    }
    Ok(RunOutput { record, state })
}

/// Runs from a fresh initialization. Deterministic in `(config, seed)`:
/// the same config produces bit-identical records and final state.
pub fn run(
    config: &OptConfig,
    objective: &dyn Objective,
) -> std::result::Result<RunOutput, RunFailure> {
    let state = OptState::init(objective, config);
    run_from(config, objective, state)
}
