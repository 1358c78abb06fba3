//! Index-ordered map helpers backing the data-parallel code paths.
//!
//! With the default `parallel` feature, [`map_indexed`] fans work out over
//! rayon and collects results in index order; without it, it is a plain
//! sequential map. [`map_indexed_seq`] is always sequential and always
//! available so tests and benches can compare the two paths — because every
//! reduction in this crate folds the collected results in ascending index
//! order, both produce bit-identical output within a build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..count`, collecting results in index order. Runs on the
/// rayon thread pool when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(count, f)
}

/// Always-sequential reference path.
pub fn map_indexed_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}
