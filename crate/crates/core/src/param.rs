//! Flat parameter vectors with a named segment layout.
//!
//! All optimization state lives in a single flat `Vec<f64>`; the layout
//! records which slice belongs to which named part of the model (a weight
//! matrix, a bias vector, ...) so objectives can view slices without owning
//! a second copy of the data.

use std::sync::Arc;

use crate::error::{Result, SzoError};

/// One named contiguous slice of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Ordered, disjoint segments exactly covering `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    segments: Vec<Segment>,
    total_len: usize,
}

impl Layout {
    /// Builds a layout from `(name, length)` pairs laid out back to back.
    pub fn from_parts<S: Into<String>>(parts: impl IntoIterator<Item = (S, usize)>) -> Layout {
        let mut segments = Vec::new();
        let mut offset = 0;
        for (name, len) in parts {
            segments.push(Segment { name: name.into(), offset, len });
            offset += len;
        }
        Layout { segments, total_len: offset }
    }

    /// A single anonymous segment covering the whole vector.
    pub fn flat(n: usize) -> Layout {
        Layout::from_parts([("all", n)])
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Looks up a segment by name.
    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }
}

/// A parameter vector: finite 64-bit values plus their layout.
///
/// The layout is shared (`Arc`) so that the perturbed copies created by the
/// estimators cost one `Vec<f64>` clone and nothing more.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Arc<Layout>,
}

impl ParamVector {
    /// Wraps values in the given layout. Errors if the layout does not cover
    /// the vector exactly or any value is non-finite.
    pub fn new(values: Vec<f64>, layout: Arc<Layout>) -> Result<ParamVector> {
        SzoError::check_len(layout.total_len(), values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SzoError::NonFinite {
                context: format!("ParamVector::new (coordinate {i})"),
                at: Some(values),
            });
        }
        Ok(ParamVector { values, layout })
    }

    /// A vector with a single flat segment.
    pub fn flat(values: Vec<f64>) -> Result<ParamVector> {
        let layout = Arc::new(Layout::flat(values.len()));
        ParamVector::new(values, layout)
    }

    /// All-zero vector with the given layout.
    pub fn zeros(layout: Arc<Layout>) -> ParamVector {
        ParamVector { values: vec![0.0; layout.total_len()], layout }
    }

    /// Replaces the values, keeping the layout. No finiteness check: this is
    /// the hot path used by the estimators, which validate results instead.
    pub fn with_values(&self, values: Vec<f64>) -> Result<ParamVector> {
        SzoError::check_len(self.len(), values.len())?;
        Ok(ParamVector { values, layout: Arc::clone(&self.layout) })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// Slice view of a named segment.
    pub fn segment_values(&self, name: &str) -> Option<&[f64]> {
        let seg = self.layout.segment(name)?;
        Some(&self.values[seg.offset..seg.offset + seg.len])
    }
}

/// Euclidean norm of a slice.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two equal-length slices.
pub fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
