//! Sparse-perturbation stochastic zeroth-order (SZO) optimization.
//!
//! This crate implements a Gaussian-smoothing gradient-free optimizer whose
//! perturbations are restricted to a shrinking subset of coordinates by a
//! binary mask. Masked coordinates are either *frozen* (keep their value) or
//! *pruned* (set to zero); the mask shrinks on a multiplicative schedule
//! using magnitude or random-candidate selection. Alongside the optimizer it
//! ships the diagnostics used to study such runs (distance of the estimate
//! to the true gradient, local/neighborhood Lipschitz probes, sparsity,
//! accuracy) and a verification lab that Monte-Carlo-checks the moment
//! identities and bounds the method's analysis rests on.
//!
//! Modules:
//! - [`param`], [`mask`], [`rng`], [`exec`]: shared primitives (flat
//!   parameter vectors, packed masks, seeded streams, parallel mapping).
//! - [`objectives`]: differentiable test problems exposing both zeroth-order
//!   evaluation and analytic gradients, plus data loading/synthesis.
//! - [`estimators`]: one-point, two-point, and two-sided smoothed gradient
//!   estimators with k-sample averaging.
//! - [`masking`]: magnitude and random-candidate mask construction and the
//!   reduction schedule.
//! - [`optimizer`]: the descent loop with freezing/pruning variants,
//!   learning-rate policies, and binary checkpoints.
//! - [`metrics`]: run records and diagnostic quantities.
//! - [`theorylab`]: Monte-Carlo and closed-form verification of the moment
//!   bounds, unbiasedness, and the convergence-bound arithmetic.

pub mod error;
pub mod exec;
pub mod mask;
pub mod param;
pub mod rng;

pub mod estimators;
pub mod masking;
pub mod metrics;
pub mod objectives;
pub mod optimizer;
pub mod theorylab;

pub use error::{Result, SzoError};
pub use mask::{apply_mask, apply_mask_inplace, mask_sparsity, Mask};
pub use param::{Layout, ParamVector, Segment};
pub use rng::RngStream;
