//! Packed binary masks over parameter coordinates.
//!
//! A mask selects which coordinates are perturbed and updated; `nbar` (the
//! number of ones) is the effective problem dimension and is cached because
//! it is read on every optimizer step.

use crate::error::{Result, SzoError};

const WORD_BITS: usize = 64;

/// Binary mask over `n` coordinates, stored as packed 64-bit words with a
/// cached popcount.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    words: Vec<u64>,
    len: usize,
    nbar: usize,
}

impl Mask {
    /// All-ones mask (every coordinate active).
    pub fn all_ones(n: usize) -> Mask {
        let mut m = Mask { words: vec![!0u64; n.div_ceil(WORD_BITS)], len: n, nbar: n };
        m.clear_tail();
        m
    }

    /// All-zeros mask.
    pub fn all_zeros(n: usize) -> Mask {
        Mask { words: vec![0u64; n.div_ceil(WORD_BITS)], len: n, nbar: 0 }
    }

    /// Mask with ones exactly at the given indices.
    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Mask> {
        let mut m = Mask::all_zeros(n);
        for i in indices {
            if i >= n {
                return Err(SzoError::Domain(format!("mask index {i} out of range for n={n}")));
            }
            m.set(i, true);
        }
        Ok(m)
    }

    /// Mask built from one bool per coordinate.
    pub fn from_bools(bits: &[bool]) -> Mask {
        let mut m = Mask::all_zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                m.set(i, true);
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Cached count of one-bits.
    pub fn nbar(&self) -> usize {
        self.nbar
    }

    /// Recounts ones from the packed words, ignoring the cache. Exists so
    /// tests can assert the cache is never stale.
    pub fn recount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let word = &mut self.words[i / WORD_BITS];
        let bit = 1u64 << (i % WORD_BITS);
        let was = *word & bit != 0;
        if value && !was {
            *word |= bit;
            self.nbar += 1;
        } else if !value && was {
            *word &= !bit;
            self.nbar -= 1;
        }
    }

    /// Indices of active (one) coordinates, ascending.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i)).collect()
    }

    /// Iterator over all bits, in coordinate order.
    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// True if every active coordinate of `self` is active in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Packed little-endian bytes (bit `i` = byte `i/8`, bit position `i%8`).
    /// This is the on-disk checkpoint encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.get(i) {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        bytes
    }

    /// Inverse of [`Mask::to_bytes`]. Errors if padding bits are set or the
    /// byte count does not match `n`.
    pub fn from_bytes(n: usize, bytes: &[u8]) -> Result<Mask> {
        if bytes.len() != n.div_ceil(8) {
            return Err(SzoError::Format(format!(
                "mask byte length {} does not match n={n}",
                bytes.len()
            )));
        }
        let mut m = Mask::all_zeros(n);
        for (i, chunk) in bytes.iter().enumerate() {
            for bit in 0..8 {
                let idx = i * 8 + bit;
                if chunk >> bit & 1 == 1 {
                    if idx >= n {
                        return Err(SzoError::Format(
                            "mask padding bits must be zero".into(),
                        ));
                    }
                    m.set(idx, true);
                }
            }
        }
        Ok(m)
    }

    /// Zeroes any bits beyond `len` in the last word.
    fn clear_tail(&mut self) {
        let tail = self.len % WORD_BITS;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }
}

/// Componentwise product `m ⊙ v`.
pub fn apply_mask(m: &Mask, v: &[f64]) -> Result<Vec<f64>> {
    SzoError::check_len(m.len(), v.len())?;
    Ok(v.iter()
        .enumerate()
        .map(|(i, &x)| if m.get(i) { x } else { 0.0 })
        .collect())
}

/// In-place variant of [`apply_mask`] for the optimizer hot path.
pub fn apply_mask_inplace(m: &Mask, v: &mut [f64]) -> Result<()> {
    SzoError::check_len(m.len(), v.len())?;
    for (i, x) in v.iter_mut().enumerate() {
        if !m.get(i) {
            *x = 0.0;
        }
    }
    Ok(())
}

/// Sparsity `1 − n̄/n`. Errors on the empty mask.
pub fn mask_sparsity(m: &Mask) -> Result<f64> {
    if m.len() == 0 {
        return Err(SzoError::Domain("sparsity undefined for n = 0".into()));
    }
    Ok(1.0 - m.nbar() as f64 / m.len() as f64)
}
