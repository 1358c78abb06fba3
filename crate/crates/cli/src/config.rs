//! Flat key=value experiment configuration.
//!
//! The on-disk format is one `key = value` per line; blank lines and lines
//! starting with `#` are ignored. Every key has a documented default, an
//! unknown key is rejected by name, and a duplicate key in the same file is
//! an error. `--set key=value` overrides (applied in order) and the
//! `--seed`/`--out` flags take precedence over the file.
//!
//! [`ExperimentConfig::manifest`] renders the fully resolved configuration
//! back into this format (keys sorted, values normalized), so a manifest is
//! itself a valid config file and re-running it reproduces the original
//! outputs byte-for-byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use szo_core::estimators::EstimatorKind;
use szo_core::masking::MaskSchedule;
use szo_core::objectives::{
    logistic_objective, mlp_objective, mnist_from_dir, sparse_quadratic_objective, synth_blobs,
    Objective,
};
use szo_core::optimizer::{LearningRate, OptConfig, Variant};
use szo_core::rng::{RngStream, DATA_BASE};

use crate::CliError;

/// Environment variable consulted for the dataset directory when the
/// `data_dir` key is empty.
pub const DATA_DIR_ENV: &str = "SZO_DATA_DIR";

/// Which test problem a run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Multinomial logistic regression on synthetic Gaussian blobs.
    Blobs,
    /// Multi-layer perceptron on synthetic Gaussian blobs.
    Mlp,
    /// Diagonal quadratic with every coordinate active.
    Quadratic,
    /// Diagonal quadratic whose gradient lives on the first `quad_active`
    /// coordinates only.
    SparseQuadratic,
    /// Multinomial logistic regression on an IDX-format digit dataset
    /// loaded from `data_dir` (or `$SZO_DATA_DIR`).
    Mnist,
}

impl ObjectiveKind {
    pub fn token(self) -> &'static str {
        match self {
            ObjectiveKind::Blobs => "blobs",
            ObjectiveKind::Mlp => "mlp",
            ObjectiveKind::Quadratic => "quadratic",
            ObjectiveKind::SparseQuadratic => "sparse_quadratic",
            ObjectiveKind::Mnist => "mnist",
        }
    }

    fn from_token(token: &str) -> Result<ObjectiveKind, String> {
        match token {
            "blobs" => Ok(ObjectiveKind::Blobs),
            "mlp" => Ok(ObjectiveKind::Mlp),
            "quadratic" => Ok(ObjectiveKind::Quadratic),
            "sparse_quadratic" => Ok(ObjectiveKind::SparseQuadratic),
            "mnist" => Ok(ObjectiveKind::Mnist),
            other => Err(format!(
                "unknown objective '{other}' (expected blobs, mlp, quadratic, \
                 sparse_quadratic, or mnist)"
            )),
        }
    }
}

/// A fully resolved experiment description: every config key, typed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // Problem / data.
    pub objective: ObjectiveKind,
    pub classes: usize,
    pub dims: usize,
    pub per_class: usize,
    pub spread: f64,
    pub data_seed: u64,
    pub data_dir: String,
    pub pool_factor: usize,
    pub hidden: Vec<usize>,
    pub l2: f64,
    pub quad_dim: usize,
    pub quad_active: usize,
    pub quad_scale: f64,
    // Optimizer.
    pub variant: Variant,
    pub estimator: EstimatorKind,
    pub mu: f64,
    pub k: usize,
    pub lr: LearningRate,
    pub batch: usize,
    pub total_steps: u64,
    pub keep: f64,
    pub interval_epochs: u64,
    pub interval_steps: u64,
    pub max_events: u64,
    pub candidates: usize,
    pub seeds: Vec<u64>,
    pub eval_epochs: u64,
    pub eval_steps: u64,
    pub neighbor_samples: usize,
    pub neighbor_range: f64,
    // Output.
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            objective: ObjectiveKind::Blobs,
            classes: 3,
            dims: 8,
            per_class: 40,
            spread: 1.0,
            data_seed: 7,
            data_dir: String::new(),
            pool_factor: 2,
            hidden: vec![32],
            l2: 0.0,
            quad_dim: 200,
            quad_active: 10,
            quad_scale: 1.0,
            variant: Variant::Dense,
            estimator: EstimatorKind::TwoSided,
            mu: 0.05,
            k: 10,
            lr: LearningRate::Fixed(0.2),
            batch: 64,
            total_steps: 500,
            keep: 0.8,
            interval_epochs: 5,
            interval_steps: 0,
            max_events: 19,
            candidates: 50,
            seeds: vec![1],
            eval_epochs: 1,
            eval_steps: 0,
            neighbor_samples: 10,
            neighbor_range: 0.5,
            out: PathBuf::from("runs"),
        }
    }
}

/// Estimator token used in config files and the manifest.
fn estimator_token(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::OnePoint => "onePoint",
        EstimatorKind::TwoPoint => "twoPoint",
        EstimatorKind::TwoSided => "twoSided",
    }
}

fn estimator_from_token(token: &str) -> Result<EstimatorKind, String> {
    match token {
        "onePoint" => Ok(EstimatorKind::OnePoint),
        "twoPoint" => Ok(EstimatorKind::TwoPoint),
        "twoSided" => Ok(EstimatorKind::TwoSided),
        other => Err(format!(
            "unknown estimator '{other}' (expected onePoint, twoPoint, or twoSided)"
        )),
    }
}

fn lr_token(lr: LearningRate) -> String {
    match lr {
        LearningRate::Fixed(h) => format!("{h}"),
        LearningRate::Theory => "theory".to_string(),
    }
}

fn lr_from_token(token: &str) -> Result<LearningRate, String> {
    if token == "theory" {
        return Ok(LearningRate::Theory);
    }
    let h: f64 = token
        .parse()
        .map_err(|_| format!("expected 'theory' or a positive number, got '{token}'"))?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(format!("fixed learning rate must be a positive finite number, got {token}"));
    }
    Ok(LearningRate::Fixed(h))
}

fn join_list<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| format!("bad {what} entry '{}' in '{value}'", part.trim()))
        })
        .collect()
}

/// Splits raw config text into `(line_number, key, value)` triples.
/// Duplicate keys are rejected here; semantic validation happens when the
/// triples are applied to an [`ExperimentConfig`].
fn parse_kv_lines(text: &str) -> Result<Vec<(usize, String, String)>, CliError> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(CliError::Config(format!(
                "line {line_no}: expected 'key = value', got '{line}'"
            )));
        };
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim().to_string();
        if key.is_empty() {
            return Err(CliError::Config(format!("line {line_no}: empty key")));
        }
        if let Some(first) = seen.insert(key.clone(), line_no) {
            return Err(CliError::Config(format!(
                "line {line_no}: duplicate key '{key}' (first set on line {first})"
            )));
        }
        entries.push((line_no, key, value));
    }
    Ok(entries)
}

impl ExperimentConfig {
    /// Applies one `key = value` pair. `origin` names where the pair came
    /// from ("line 3" or "--set") for error messages.
    fn apply(&mut self, key: &str, value: &str, origin: &str) -> Result<(), CliError> {
        let fail = |msg: String| CliError::Config(format!("{origin}: key '{key}': {msg}"));
        let parse_u64 = |value: &str| -> Result<u64, CliError> {
            value.parse().map_err(|_| fail(format!("expected a non-negative integer, got '{value}'")))
        };
        let parse_usize = |value: &str| -> Result<usize, CliError> {
            value.parse().map_err(|_| fail(format!("expected a non-negative integer, got '{value}'")))
        };
        let parse_f64 = |value: &str| -> Result<f64, CliError> {
            value.parse().map_err(|_| fail(format!("expected a number, got '{value}'")))
        };
        match key {
            "objective" => self.objective = ObjectiveKind::from_token(value).map_err(fail)?,
            "classes" => self.classes = parse_usize(value)?,
            "dims" => self.dims = parse_usize(value)?,
            "per_class" => self.per_class = parse_usize(value)?,
            "spread" => self.spread = parse_f64(value)?,
            "data_seed" => self.data_seed = parse_u64(value)?,
            "data_dir" => self.data_dir = value.to_string(),
            "pool_factor" => self.pool_factor = parse_usize(value)?,
            "hidden" => self.hidden = parse_list(value, "layer size").map_err(fail)?,
            "l2" => self.l2 = parse_f64(value)?,
            "quad_dim" => self.quad_dim = parse_usize(value)?,
            "quad_active" => self.quad_active = parse_usize(value)?,
            "quad_scale" => self.quad_scale = parse_f64(value)?,
            "variant" => {
                self.variant = Variant::from_token(value).map_err(|e| fail(e.to_string()))?
            }
            "estimator" => self.estimator = estimator_from_token(value).map_err(fail)?,
            "mu" => self.mu = parse_f64(value)?,
            "k" => self.k = parse_usize(value)?,
            "lr" => self.lr = lr_from_token(value).map_err(fail)?,
            "batch" => self.batch = parse_usize(value)?,
            "total_steps" => self.total_steps = parse_u64(value)?,
            "keep" => self.keep = parse_f64(value)?,
            "interval_epochs" => self.interval_epochs = parse_u64(value)?,
            "interval_steps" => self.interval_steps = parse_u64(value)?,
            "max_events" => self.max_events = parse_u64(value)?,
            "candidates" => self.candidates = parse_usize(value)?,
            "seeds" => {
                self.seeds = parse_list(value, "seed").map_err(fail)?;
                if self.seeds.is_empty() {
                    return Err(fail("at least one seed is required".into()));
                }
            }
            "eval_epochs" => self.eval_epochs = parse_u64(value)?,
            "eval_steps" => self.eval_steps = parse_u64(value)?,
            "neighbor_samples" => self.neighbor_samples = parse_usize(value)?,
            "neighbor_range" => self.neighbor_range = parse_f64(value)?,
            "out" => self.out = PathBuf::from(value),
            other => {
                return Err(CliError::Config(format!("{origin}: unknown key '{other}'")));
            }
        }
        Ok(())
    }

    /// Builds a config from an optional file, `--set` overrides (in order),
    /// and the `--seed` / `--out` flags (which win over both).
    pub fn from_sources(
        file_text: Option<&str>,
        sets: &[String],
        seed_override: Option<u64>,
        out_override: Option<&Path>,
    ) -> Result<ExperimentConfig, CliError> {
        let mut config = ExperimentConfig::default();
        if let Some(text) = file_text {
            for (line_no, key, value) in parse_kv_lines(text)? {
                config.apply(&key, &value, &format!("line {line_no}"))?;
            }
        }
        for set in sets {
            let Some(eq) = set.find('=') else {
                return Err(CliError::Config(format!(
                    "--set '{set}': expected key=value"
                )));
            };
            config.apply(set[..eq].trim(), set[eq + 1..].trim(), &format!("--set '{set}'"))?;
        }
        if let Some(seed) = seed_override {
            config.seeds = vec![seed];
        }
        if let Some(out) = out_override {
            config.out = out.to_path_buf();
        }
        config.validate()?;
        Ok(config)
    }

    /// Cross-field validation beyond per-key parsing.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.classes < 2 {
            return fail(format!("classes must be at least 2, got {}", self.classes));
        }
        if self.dims == 0 || self.per_class == 0 {
            return fail("dims and per_class must be at least 1".into());
        }
        if self.spread < 0.0 || !self.spread.is_finite() {
            return fail(format!("spread must be finite and non-negative, got {}", self.spread));
        }
        if self.pool_factor == 0 {
            return fail("pool_factor must be at least 1".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer sizes must be positive".into());
        }
        if self.l2 < 0.0 || !self.l2.is_finite() {
            return fail(format!("l2 must be finite and non-negative, got {}", self.l2));
        }
        if self.quad_dim == 0 {
            return fail("quad_dim must be at least 1".into());
        }
        // quad_active only matters for the sparse quadratic; a default value
        // larger than quad_dim must not invalidate other objectives.
        if self.objective == ObjectiveKind::SparseQuadratic
            && (self.quad_active == 0 || self.quad_active > self.quad_dim)
        {
            return fail(format!(
                "quad_active must be in 1..=quad_dim ({}), got {}",
                self.quad_dim, self.quad_active
            ));
        }
        if !(self.quad_scale > 0.0) || !self.quad_scale.is_finite() {
            return fail(format!("quad_scale must be positive, got {}", self.quad_scale));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return fail(format!("mu must be positive, got {}", self.mu));
        }
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if self.batch == 0 {
            return fail("batch must be at least 1".into());
        }
        if !(self.keep > 0.0 && self.keep <= 1.0) {
            return fail(format!("keep must be in (0, 1], got {}", self.keep));
        }
        if self.interval_steps == 0 && self.interval_epochs == 0 {
            return fail("one of interval_steps / interval_epochs must be positive".into());
        }
        if self.candidates == 0 {
            return fail("candidates must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.neighbor_samples == 0 {
            return fail("neighbor_samples must be at least 1".into());
        }
        if !(self.neighbor_range > 0.0) || !self.neighbor_range.is_finite() {
            return fail(format!("neighbor_range must be positive, got {}", self.neighbor_range));
        }
        Ok(())
    }

    /// The resolved configuration in config-file syntax: comment header,
    /// then every key sorted alphabetically. Parsing the manifest yields
    /// this exact config back.
    pub fn manifest(&self, objective_id: &str) -> String {
        let mut pairs: Vec<(&str, String)> = vec![
            ("objective", self.objective.token().to_string()),
            ("classes", self.classes.to_string()),
            ("dims", self.dims.to_string()),
            ("per_class", self.per_class.to_string()),
            ("spread", format!("{}", self.spread)),
            ("data_seed", self.data_seed.to_string()),
            ("data_dir", self.data_dir.clone()),
            ("pool_factor", self.pool_factor.to_string()),
            ("hidden", join_list(&self.hidden)),
            ("l2", format!("{}", self.l2)),
            ("quad_dim", self.quad_dim.to_string()),
            ("quad_active", self.quad_active.to_string()),
            ("quad_scale", format!("{}", self.quad_scale)),
            ("variant", self.variant.token().to_string()),
            ("estimator", estimator_token(self.estimator).to_string()),
            ("mu", format!("{}", self.mu)),
            ("k", self.k.to_string()),
            ("lr", lr_token(self.lr)),
            ("batch", self.batch.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("keep", format!("{}", self.keep)),
            ("interval_epochs", self.interval_epochs.to_string()),
            ("interval_steps", self.interval_steps.to_string()),
            ("max_events", self.max_events.to_string()),
            ("candidates", self.candidates.to_string()),
            ("seeds", join_list(&self.seeds)),
            ("eval_epochs", self.eval_epochs.to_string()),
            ("eval_steps", self.eval_steps.to_string()),
            ("neighbor_samples", self.neighbor_samples.to_string()),
            ("neighbor_range", format!("{}", self.neighbor_range)),
            ("out", self.out.display().to_string()),
        ];
        pairs.sort_by(|a, b| a.0.cmp(b.0));
        let mut text = String::new();
        text.push_str("# resolved szo configuration\n");
        text.push_str(&format!("# tool version {}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("# objective id: {objective_id}\n"));
        for (key, value) in pairs {
            text.push_str(&format!("{key} = {value}\n"));
        }
        text
    }

    /// Constructs the objective this config describes. Synthetic datasets
    /// are drawn from `data_seed` (independent of the run seeds, so every
    /// seed and variant of an experiment shares the same data).
    pub fn build_objective(&self) -> Result<Box<dyn Objective>, CliError> {
        let fail = |msg: String| CliError::Config(msg);
        let blob_data = || -> Result<Arc<szo_core::objectives::Dataset>, CliError> {
            let mut rng = RngStream::new(self.data_seed, DATA_BASE);
            let data =
                synth_blobs(&mut rng, self.classes, self.dims, self.per_class, self.spread)
                    .map_err(|e| fail(format!("building blob dataset: {e}")))?;
            Ok(Arc::new(data))
        };
        match self.objective {
            ObjectiveKind::Blobs => {
                let objective = logistic_objective(blob_data()?, self.classes, self.l2)
                    .map_err(|e| fail(format!("building logistic objective: {e}")))?;
                Ok(Box::new(objective))
            }
            ObjectiveKind::Mlp => {
                let mut sizes = vec![self.dims];
                sizes.extend_from_slice(&self.hidden);
                sizes.push(self.classes);
                let objective = mlp_objective(&sizes, blob_data()?)
                    .map_err(|e| fail(format!("building mlp objective: {e}")))?;
                Ok(Box::new(objective))
            }
            ObjectiveKind::Quadratic => {
                let active: Vec<usize> = (0..self.quad_dim).collect();
                let objective =
                    sparse_quadratic_objective(self.quad_dim, &active, self.quad_scale)
                        .map_err(|e| fail(format!("building quadratic objective: {e}")))?;
                Ok(Box::new(objective))
            }
            ObjectiveKind::SparseQuadratic => {
                let active: Vec<usize> = (0..self.quad_active).collect();
                let objective =
                    sparse_quadratic_objective(self.quad_dim, &active, self.quad_scale)
                        .map_err(|e| fail(format!("building quadratic objective: {e}")))?;
                Ok(Box::new(objective))
            }
            ObjectiveKind::Mnist => {
                let dir = if !self.data_dir.is_empty() {
                    PathBuf::from(&self.data_dir)
                } else if let Ok(env_dir) = std::env::var(DATA_DIR_ENV) {
                    if env_dir.is_empty() {
                        return Err(fail(format!(
                            "objective 'mnist' needs data_dir or ${DATA_DIR_ENV}"
                        )));
                    }
                    PathBuf::from(env_dir)
                } else {
                    return Err(fail(format!(
                        "objective 'mnist' needs data_dir or ${DATA_DIR_ENV}"
                    )));
                };
                let data = mnist_from_dir(&dir, self.pool_factor, self.data_seed)
                    .map_err(|e| fail(format!("loading digit data from {}: {e}", dir.display())))?;
                let objective = logistic_objective(data, 10, self.l2)
                    .map_err(|e| fail(format!("building logistic objective: {e}")))?;
                Ok(Box::new(objective))
            }
        }
    }

    /// Steps per epoch for this objective: `ceil(train/batch)` when a
    /// dataset backs it, 1 for analytic objectives (an "epoch" is a step).
    pub fn epoch_len(&self, objective: &dyn Objective) -> u64 {
        match objective.dataset() {
            Some(data) if !data.train().is_empty() => {
                (data.train().len() as u64).div_ceil(self.batch as u64)
            }
            _ => 1,
        }
    }

    /// Resolves the optimizer config for one seed. Epoch-denominated
    /// intervals are converted using [`ExperimentConfig::epoch_len`]; an
    /// explicit `interval_steps` / `eval_steps` wins over the epoch form.
    pub fn opt_config(&self, objective: &dyn Objective, seed: u64) -> Result<OptConfig, CliError> {
        let epoch_len = self.epoch_len(objective);
        let interval = if self.interval_steps > 0 {
            self.interval_steps
        } else {
            self.interval_epochs * epoch_len
        };
        let schedule = MaskSchedule::new(interval, self.keep, self.max_events)
            .map_err(|e| CliError::Config(format!("mask schedule: {e}")))?;
        let eval_interval =
            if self.eval_steps > 0 { self.eval_steps } else { self.eval_epochs * epoch_len };
        let config = OptConfig {
            variant: self.variant,
            kind: self.estimator,
            mu: self.mu,
            k: self.k,
            learning_rate: self.lr,
            schedule,
            batch_size: self.batch,
            total_steps: self.total_steps,
            seed,
            candidates: self.candidates,
            eval_interval,
            neighbor_samples: self.neighbor_samples,
            neighbor_half_range: self.neighbor_range,
        };
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }
}
