//! Mask construction and scheduling: magnitude-based keeps, random-candidate
//! selection scored by a caller-supplied criterion, and the multiplicative
//! shrink schedule that removes a fixed fraction of the remaining active
//! coordinates at every sparsification event.
//!
//! All constructors produce masks *nested* inside the previous one — a
//! coordinate, once masked, never comes back — which is what makes frozen
//! coordinates stay frozen and active counts follow [`project_schedule`]
//! exactly.

use crate::error::{Result, SzoError};
use crate::exec::map_indexed;
use crate::mask::Mask;
use crate::param::ParamVector;
use crate::rng::RngStream;

/// When and how aggressively sparsification events fire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSchedule {
    /// Steps between events (`s`): an event fires at `step > 0` with
    /// `step % interval_steps == 0`, never at step 0.
    pub interval_steps: u64,
    /// Fraction of currently active coordinates kept per event, in (0, 1].
    pub keep_fraction: f64,
    /// Events stop firing once this many have occurred.
    pub max_events: u64,
}

impl MaskSchedule {
    pub fn new(interval_steps: u64, keep_fraction: f64, max_events: u64) -> Result<Self> {
        if interval_steps == 0 {
            return Err(SzoError::Domain("interval_steps must be at least 1".into()));
        }
        check_keep_fraction(keep_fraction)?;
        Ok(MaskSchedule { interval_steps, keep_fraction, max_events })
    }
}

fn check_keep_fraction(keep_fraction: f64) -> Result<()> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(SzoError::Domain(format!(
            "keep_fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    Ok(())
}

/// True iff a sparsification event fires at `step`. The initial mask is
/// all-ones, so step 0 never fires; events stop after `max_events`.
pub fn should_sparsify(step: u64, schedule: &MaskSchedule, events_so_far: u64) -> bool {
    step > 0 && step % schedule.interval_steps == 0 && events_so_far < schedule.max_events
}

/// Active count kept by one event: `ceil(keep_fraction · nbar_prev)`.
pub fn keep_count(nbar_prev: usize, keep_fraction: f64) -> usize {
    (keep_fraction * nbar_prev as f64).ceil() as usize
}

/// Active count after `events` applications of the shrink recurrence
/// `n̄ ← ceil(keep_fraction · n̄)` starting from `n0`.
pub fn project_schedule(n0: usize, keep_fraction: f64, events: u64) -> usize {
    let mut n = n0;
    for _ in 0..events {
        n = keep_count(n, keep_fraction);
    }
    n
}

/// Keeps the `ceil(keep_fraction · n̄_prev)` active coordinates with the
/// largest `|w_i|`; ties keep the lower index. Previously masked coordinates
/// stay masked. An already-empty mask is returned unchanged (logged).
pub fn magnitude_mask(w: &ParamVector, m_prev: &Mask, keep_fraction: f64) -> Result<Mask> {
    check_keep_fraction(keep_fraction)?;
    SzoError::check_len(w.len(), m_prev.len())?;
    let nbar_prev = m_prev.nbar();
    if nbar_prev == 0 {
        log::warn!("magnitude_mask called with an empty mask; returning it unchanged");
        return Ok(m_prev.clone());
    }
    let values = w.values();
    let mut active: Vec<usize> = m_prev.active_indices();
    for &i in &active {
        if !values[i].is_finite() {
            return Err(SzoError::NonFinite {
                context: format!("parameter magnitude at coordinate {i}"),
                at: None,
            });
        }
    }
    let keep_n = keep_count(nbar_prev, keep_fraction);
    active.sort_by(|&a, &b| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .expect("finiteness checked above")
            .then(a.cmp(&b))
    });
    Mask::from_indices(w.len(), active.into_iter().take(keep_n))
}

/// Draws one uniform-random nested mask keeping `keep_n` of the active
/// coordinates of `m_prev` (partial Fisher–Yates over the active index
/// list). Exposed so callers can reproduce the exact candidate sequence of
/// [`random_mask_select`] from the documented substream layout.
pub fn sample_nested_mask(m_prev: &Mask, keep_n: usize, rng: &mut RngStream) -> Result<Mask> {
    let mut pool = m_prev.active_indices();
    if keep_n > pool.len() {
        return Err(SzoError::Domain(format!(
            "cannot keep {keep_n} of {} active coordinates",
            pool.len()
        )));
    }
    for i in 0..keep_n {
        let j = i + rng.next_index(pool.len() - i);
        pool.swap(i, j);
    }
    Mask::from_indices(m_prev.len(), pool.into_iter().take(keep_n))
}

/// Samples `candidates` uniform nested masks (candidate `c` on
/// `rng.substream(candidates, c)`), scores each with `eval_fn` (higher is
/// better; scoring may run concurrently), and returns the first-sampled
/// candidate achieving the maximum score. An already-empty mask is returned
/// unchanged (logged).
pub fn random_mask_select<F>(
    m_prev: &Mask,
    keep_fraction: f64,
    candidates: usize,
    eval_fn: F,
    rng: &RngStream,
) -> Result<Mask>
where
    F: Fn(&Mask) -> Result<f64> + Sync,
{
    check_keep_fraction(keep_fraction)?;
    if candidates == 0 {
        return Err(SzoError::Domain("candidate count must be at least 1".into()));
    }
    let nbar_prev = m_prev.nbar();
    if nbar_prev == 0 {
        log::warn!("random_mask_select called with an empty mask; returning it unchanged");
        return Ok(m_prev.clone());
    }
    let keep_n = keep_count(nbar_prev, keep_fraction);
    let mut masks = Vec::with_capacity(candidates);
    for c in 0..candidates {
        let mut stream = rng.substream(candidates as u64, c as u64);
        masks.push(sample_nested_mask(m_prev, keep_n, &mut stream)?);
    }
    let scores = map_indexed(candidates, |c| eval_fn(&masks[c]));
    let mut best: Option<(usize, f64)> = None;
    for (c, score) in scores.into_iter().enumerate() {
        let score = score?;
        if !score.is_finite() {
            return Err(SzoError::NonFinite {
                context: format!("score of mask candidate {c}"),
                at: None,
            });
        }
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((c, score)),
        }
    }
    let (winner, _) = best.expect("candidates ≥ 1 checked above");
    Ok(masks.swap_remove(winner))
}
