//! Seeded, stream-addressable random sampling.
//!
//! Every random draw in the crate comes from an [`RngStream`] identified by
//! `(master_seed, stream_id)`. Identical ids reproduce identical sequences
//! within one build; distinct ids give statistically independent streams.
//! The generator is ChaCha8 — a published counter-based generator whose
//! native 64-bit stream parameter maps directly onto `stream_id` — and
//! normal variates use the Marsaglia polar transform, implemented here so
//! the sampling algorithm is pinned by this crate rather than by a
//! dependency's internals. Cross-language or cross-version bit-identity is
//! not promised; within-build determinism is.
//!
//! # Stream-id allocation
//!
//! Consumers never share a live stream; they derive fresh streams from
//! structured ids. The optimizer partitions the id space by purpose:
//!
//! | purpose                    | stream id                      |
//! |----------------------------|--------------------------------|
//! | parameter initialization   | `INIT_STREAM` (0)              |
//! | minibatch shuffle, epoch e | `SHUFFLE_BASE + e`             |
//! | mask event i               | `MASK_EVENT_BASE + i`          |
//! | neighborhood probe, step t | `NEIGHBOR_BASE + t`            |
//! | estimator base, step t     | `ESTIMATOR_BASE + t`           |
//!
//! Estimator sample `j` of `k` at step `t` then uses the derived id
//! `(ESTIMATOR_BASE + t)·k + j` (see [`RngStream::substream`]), which is
//! injective for fixed `k` and disjoint from the other purpose ranges.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id for parameter initialization.
pub const INIT_STREAM: u64 = 0;
/// Base id for per-epoch minibatch shuffles.
pub const SHUFFLE_BASE: u64 = 1 << 32;
/// Base id for per-event candidate-mask sampling.
pub const MASK_EVENT_BASE: u64 = 2 << 32;
/// Base id for per-step neighborhood Lipschitz probes.
pub const NEIGHBOR_BASE: u64 = 3 << 32;
/// Base id for per-step estimator sampling.
pub const ESTIMATOR_BASE: u64 = 4 << 32;
/// Base id for dataset synthesis.
pub const DATA_BASE: u64 = 5 << 32;
/// Base id for verification/report computations.
pub const VERIFY_BASE: u64 = 6 << 32;

/// A seeded random stream: `(master_seed, stream_id)` plus generator state.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Fresh stream at position zero.
    pub fn new(master_seed: u64, stream_id: u64) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        RngStream { master_seed, stream_id, rng }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derived fresh stream with id `self.stream_id·k + j`. Samples `j` of a
    /// `k`-wide fan-out get disjoint streams, and reducing results in
    /// ascending `j` makes parallel and serial execution bit-identical.
    pub fn substream(&self, k: u64, j: u64) -> RngStream {
        RngStream::new(self.master_seed, self.stream_id.wrapping_mul(k).wrapping_add(j))
    }

    /// Next raw 64-bit value.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, bound)` by rejection (no modulo bias).
    pub fn next_index(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        let bound = bound as u64;
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % bound) as usize;
            }
        }
    }

    /// One standard-normal pair via the Marsaglia polar method.
    fn next_normal_pair(&mut self) -> (f64, f64) {
        loop {
            let x = 2.0 * self.next_f64() - 1.0;
            let y = 2.0 * self.next_f64() - 1.0;
            let s = x * x + y * y;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                return (x * factor, y * factor);
            }
        }
    }

    /// One standard-normal draw (the pair's second value is discarded, so
    /// consecutive calls match the head of each generated pair).
    pub fn next_normal(&mut self) -> f64 {
        self.next_normal_pair().0
    }

    /// `n` independent draws from N(0, 1).
    pub fn sample_std_normal(&mut self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        while out.len() + 2 <= n {
            let (a, b) = self.next_normal_pair();
            out.push(a);
            out.push(b);
        }
        if out.len() < n {
            out.push(self.next_normal_pair().0);
        }
        out
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }
}
