//! Versioned binary checkpoints of [`OptState`].
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "SSZO"
//! version  u32      currently 1
//! n        u64      parameter count
//! step     u64
//! events   u64      sparsification events fired
//! seed     u64      master seed (every RNG stream re-derives from it)
//! mask     ceil(n/8) bytes, LSB-first within each byte
//! w        n × f64
//! ```
//!
//! The master seed is the complete RNG state: every stream a run uses is
//! derived from `(seed, purpose, index)`, so resuming needs no generator
//! internals. Loop-local diagnostics (cumulative loss, the running
//! Lipschitz max behind the theory step size) are *not* stored; a resumed
//! run restarts them, which leaves fixed-step-size trajectories exactly
//! reproducible and theory-mode trajectories reproducible only until the
//! running max next changes.
//!
//! Weights are persisted verbatim — including non-finite values, because a
//! checkpoint written at a numeric failure must preserve the evidence.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Result, SzoError};
use crate::mask::Mask;
use crate::param::{Layout, ParamVector};

use super::OptState;

const MAGIC: &[u8; 4] = b"SSZO";
const VERSION: u32 = 1;

/// Serializes `state` to `path`.
pub fn checkpoint_save(state: &OptState, path: &Path) -> Result<()> {
    let n = state.w.len();
    if state.m.len() != n {
        return Err(SzoError::DimensionMismatch { expected: n, got: state.m.len() });
    }
    let mask_bytes = state.m.to_bytes();
    let mut out = Vec::with_capacity(4 + 4 + 8 * 4 + mask_bytes.len() + 8 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&state.step.to_le_bytes());
    out.extend_from_slice(&state.events_fired.to_le_bytes());
    out.extend_from_slice(&state.master_seed.to_le_bytes());
    out.extend_from_slice(&mask_bytes);
    for v in state.w.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(SzoError::Format(format!(
                "checkpoint truncated while reading {what}: need {len} bytes at offset {}, \
                 file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u32_le(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("length 4")))
    }

    fn u64_le(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("length 8")))
    }
}

/// Reads a checkpoint back. The weights come out under a single flat
/// layout segment; callers resuming a structured objective re-wrap them in
/// that objective's layout.
pub fn checkpoint_load(path: &Path) -> Result<OptState> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(SzoError::Format(format!(
            "not a checkpoint: bad magic {magic:02x?}"
        )));
    }
    let version = r.u32_le("version")?;
    if version != VERSION {
        return Err(SzoError::Format(format!(
            "unsupported checkpoint version {version}, expected {VERSION}"
        )));
    }
    let n64 = r.u64_le("parameter count")?;
    let n = usize::try_from(n64)
        .map_err(|_| SzoError::Format(format!("parameter count {n64} overflows this platform")))?;
    let step = r.u64_le("step")?;
    let events_fired = r.u64_le("event count")?;
    let master_seed = r.u64_le("seed")?;
    let mask_len = n.div_ceil(8);
    let mask = Mask::from_bytes(n, r.take(mask_len, "mask bits")?)?;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let chunk = r.take(8, "weights")?;
        values.push(f64::from_le_bytes(chunk.try_into().expect("length 8")));
        let _ = i;
    }
    if r.pos != bytes.len() {
        return Err(SzoError::Format(format!(
            "checkpoint has {} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let w = ParamVector::zeros(Arc::new(Layout::flat(n))).with_values(values)?;
    Ok(OptState { w, m: mask, step, events_fired, master_seed })
}
