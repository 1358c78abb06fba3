//! Quadratic test objectives: `f(w) = ½ wᵀAw − bᵀw`.
//!
//! These are the oracle problems for estimator and bound verification: the
//! gradient `Aw − b` is exact, the gradient Lipschitz constant is `λmax(A)`,
//! and for diagonal `A` the minimum value is closed-form.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Result, SzoError};
use crate::objectives::{Batch, Objective};
use crate::param::{Layout, ParamVector};
use crate::rng::RngStream;

/// The quadratic form's matrix, stored diagonally when possible.
#[derive(Debug, Clone)]
pub enum QuadMatrix {
    /// Diagonal PSD matrix: entries must be ≥ 0.
    Diagonal(Vec<f64>),
    /// Full symmetric PSD matrix.
    Full(Array2<f64>),
}

/// `f(w) = ½ wᵀAw − bᵀw` with analytic gradient `Aw − b`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    a: QuadMatrix,
    b: Vec<f64>,
    layout: Arc<Layout>,
    lmax: f64,
}

/// Builds a quadratic objective. `A` must be square and symmetric (PSD is
/// the caller's contract and is not verified beyond the λmax estimate being
/// meaningful); `b` must match its dimension.
pub fn quadratic_objective(a: QuadMatrix, b: Vec<f64>) -> Result<QuadraticObjective> {
    let n = b.len();
    let lmax = match &a {
        QuadMatrix::Diagonal(diag) => {
            SzoError::check_len(n, diag.len())?;
            if let Some(&d) = diag.iter().find(|&&d| d < 0.0) {
                return Err(SzoError::Domain(format!("diagonal entry {d} is negative")));
            }
            diag.iter().cloned().fold(0.0, f64::max)
        }
        QuadMatrix::Full(m) => {
            if m.nrows() != m.ncols() {
                return Err(SzoError::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
            }
            SzoError::check_len(n, m.nrows())?;
            for i in 0..n {
                for j in i + 1..n {
                    if (m[[i, j]] - m[[j, i]]).abs() > 1e-9 * (1.0 + m[[i, j]].abs()) {
                        return Err(SzoError::Domain(format!(
                            "matrix not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
            power_iteration_lmax(m)
        }
    };
    Ok(QuadraticObjective { a, b, layout: Arc::new(Layout::flat(n)), lmax })
}

/// Linear objective `f(w) = cᵀw` as the zero-matrix quadratic.
pub fn linear_objective(c: Vec<f64>) -> Result<QuadraticObjective> {
    let n = c.len();
    quadratic_objective(QuadMatrix::Diagonal(vec![0.0; n]), c.iter().map(|x| -x).collect())
}

/// Diagonal quadratic whose gradient is identically zero outside `active`:
/// `a_i = scale` and `b_i = 2.5·scale` on the active set, both zero
/// elsewhere. The off-zero linear term puts each active minimizer at 2.5,
/// well separated from standard-normal initial values, so magnitude
/// selection has a meaningful signal.
pub fn sparse_quadratic_objective(
    n: usize,
    active: &[usize],
    scale: f64,
) -> Result<QuadraticObjective> {
    if active.is_empty() {
        return Err(SzoError::Domain("active set must be nonempty".into()));
    }
    if scale <= 0.0 {
        return Err(SzoError::Domain("scale must be positive".into()));
    }
    let mut diag = vec![0.0; n];
    let mut b = vec![0.0; n];
    for &i in active {
        if i >= n {
            return Err(SzoError::Domain(format!("active index {i} out of range for n={n}")));
        }
        diag[i] = scale;
        b[i] = 2.5 * scale;
    }
    quadratic_objective(QuadMatrix::Diagonal(diag), b)
}

impl QuadraticObjective {
    /// Gradient `Aw − b` as a plain function of the values slice.
    fn grad_values(&self, w: &[f64]) -> Vec<f64> {
        match &self.a {
            QuadMatrix::Diagonal(diag) => {
                w.iter().zip(diag).zip(&self.b).map(|((w, a), b)| a * w - b).collect()
            }
            QuadMatrix::Full(m) => {
                let mut out = vec![0.0; w.len()];
                for i in 0..w.len() {
                    let mut acc = 0.0;
                    for j in 0..w.len() {
                        acc += m[[i, j]] * w[j];
                    }
                    out[i] = acc - self.b[i];
                }
                out
            }
        }
    }

    /// Minimum value `−½ Σ b_i²/a_i` for diagonal `A`. `None` when the
    /// matrix is full or the objective is unbounded below (a zero diagonal
    /// entry with a nonzero linear term).
    pub fn optimal_value(&self) -> Option<f64> {
        match &self.a {
            QuadMatrix::Diagonal(diag) => {
                let mut acc = 0.0;
                for (&a, &b) in diag.iter().zip(&self.b) {
                    if a > 0.0 {
                        acc -= b * b / (2.0 * a);
                    } else if b != 0.0 {
                        return None;
                    }
                }
                Some(acc)
            }
            QuadMatrix::Full(_) => None,
        }
    }

    pub fn matrix(&self) -> &QuadMatrix {
        &self.a
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.b
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn id(&self) -> String {
        let kind = match &self.a {
            QuadMatrix::Diagonal(_) => "diagonal",
            QuadMatrix::Full(_) => "full",
        };
        format!("quadratic({kind}, n={})", self.dim())
    }

    fn eval(&self, w: &ParamVector, _batch: &Batch) -> Result<f64> {
        SzoError::check_len(self.dim(), w.len())?;
        let v = w.values();
        let quad = match &self.a {
            QuadMatrix::Diagonal(diag) => {
                v.iter().zip(diag).map(|(w, a)| a * w * w).sum::<f64>()
            }
            QuadMatrix::Full(m) => {
                let mut acc = 0.0;
                for i in 0..v.len() {
                    for j in 0..v.len() {
                        acc += v[i] * m[[i, j]] * v[j];
                    }
                }
                acc
            }
        };
        let linear: f64 = v.iter().zip(&self.b).map(|(w, b)| w * b).sum();
        Ok(0.5 * quad - linear)
    }

    fn true_grad(&self, w: &ParamVector, _batch: &Batch) -> Result<Vec<f64>> {
        SzoError::check_len(self.dim(), w.len())?;
        Ok(self.grad_values(w.values()))
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.lmax)
    }

    /// Standard-normal initial point.
    fn init_params(&self, rng: &mut RngStream) -> ParamVector {
        let values = rng.sample_std_normal(self.dim());
        ParamVector::new(values, Arc::clone(&self.layout)).expect("normal draws are finite")
    }
}

/// Largest-eigenvalue estimate for a symmetric PSD matrix via 200 rounds of
/// power iteration from the all-ones direction. Deterministic; used only as
/// a Lipschitz hint.
fn power_iteration_lmax(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut mv = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                mv[i] += m[[i, j]] * v[j];
            }
        }
        let norm = crate::param::l2_norm(&mv);
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        for (v, mv) in v.iter_mut().zip(&mv) {
            *v = mv / norm;
        }
    }
    lambda
}
