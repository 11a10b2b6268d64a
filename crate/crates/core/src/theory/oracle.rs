//! Iterative solvers for the same fitted predictions the closed form gives,
//! sharing no factorization with it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::ProbVector;
use crate::scalar::Scalar;

use super::closed_form::TargetMatrix;
use super::linalg::{Cholesky, Matrix};

#[derive(Debug, Clone, Copy)]
pub enum OracleInput<'a, T> {
    /// Gram matrix of the (unknown) features.
    Similarity(&'a Matrix<T>),
    /// One feature row per sample.
    Features(&'a Matrix<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Damped iteration of `P - U = (Q - P) S / (Cmλ)`, the stationarity
    /// condition under a first-order softmax.
    Linearized,
    /// Gradient descent on mean cross-entropy plus `(λ/2)‖W‖²` with the exact
    /// softmax, no bias.
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig<T> {
    pub steps: usize,
    /// Step size; derived from a curvature bound when absent.
    pub learning_rate: Option<T>,
    /// Stop once the gradient norm falls below this.
    pub tolerance: T,
}

impl<T: Scalar> Default for OracleConfig<T> {
    fn default() -> Self {
        Self { steps: 100_000, learning_rate: None, tolerance: T::of(1e-8) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    /// `C × m`, one prediction per column.
    pub predictions: Matrix<T>,
    pub steps: usize,
    pub grad_norm: T,
}

fn frobenius<T: Scalar>(m: &Matrix<T>) -> T {
    m.as_slice().iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn gd_oracle<T: Scalar>(
    input: OracleInput<'_, T>,
    q: &TargetMatrix<T>,
    lambda: T,
    mode: OracleMode,
    config: &OracleConfig<T>,
) -> Result<OracleResult<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::InvalidParams(format!("lambda {lambda} must be positive")));
    }
    let m = q.num_samples();
    let rows = match input {
        OracleInput::Similarity(s) => s.rows(),
        OracleInput::Features(g) => g.rows(),
    };
    if rows != m {
        return Err(Error::DimensionMismatch { expected: m, got: rows });
    }
    match mode {
        OracleMode::Linearized => {
            let s = match input {
                OracleInput::Similarity(s) => s.clone(),
                OracleInput::Features(g) => g.matmul(&g.transpose())?,
            };
            linearized(&s, q, lambda, config)
        }
        OracleMode::Softmax => {
            let g = match input {
                OracleInput::Similarity(s) => Cholesky::new(s)?.factor().clone(),
                OracleInput::Features(g) => g.clone(),
            };
            softmax(&g, q, lambda, config)
        }
    }
}

fn linearized<T: Scalar>(
    s: &Matrix<T>,
    q: &TargetMatrix<T>,
    lambda: T,
    config: &OracleConfig<T>,
) -> Result<OracleResult<T>> {
    let (c, m) = (q.num_classes(), q.num_samples());
    let scale = T::one() / (T::of_usize(c) * T::of_usize(m) * lambda);
    let u = Matrix::filled(c, m, T::one() / T::of_usize(c));
    let rhs = q.matrix().sub(&u)?.matmul(s)?.scale(scale);
    let s_scaled = s.scale(scale);
    // Spectrum of I + S/(Cmλ) lies in [1, 1 + bound].
    let lr = config.learning_rate.unwrap_or_else(|| T::of(2.0) / (T::of(2.0) + s_scaled.gershgorin_bound()));
    let mut a = Matrix::zeros(c, m);
    let mut norm = T::infinity();
    for step in 0..=config.steps {
        // residual = rhs - A (I + S/(Cmλ))
        let residual = rhs.sub(&a.add(&a.matmul(&s_scaled)?)?)?;
        norm = frobenius(&residual);
        if !norm.is_finite() {
            return Err(Error::Diverged { epoch: step, what: "linearized oracle" });
        }
        if norm < config.tolerance {
            return Ok(OracleResult { predictions: u.add(&a)?, steps: step, grad_norm: norm });
        }
        a = a.add(&residual.scale(lr))?;
    }
    Err(Error::NotConverged { steps: config.steps, residual: norm.as_f64() })
}

fn softmax<T: Scalar>(
    g: &Matrix<T>,
    q: &TargetMatrix<T>,
    lambda: T,
    config: &OracleConfig<T>,
) -> Result<OracleResult<T>> {
    let (c, m, d) = (q.num_classes(), q.num_samples(), g.cols());
    let mm = T::of_usize(m);
    // Softmax cross-entropy has curvature at most 1/2 in the logits.
    let gram_bound = g.matmul(&g.transpose())?.gershgorin_bound();
    let lr = config.learning_rate.unwrap_or_else(|| T::one() / (gram_bound / (T::of(2.0) * mm) + lambda));
    let mut w = Matrix::zeros(d, c);
    let predict = |w: &Matrix<T>| -> Result<Matrix<T>> {
        let logits = g.matmul(w)?; // m × C
        let mut p = Matrix::zeros(c, m);
        for i in 0..m {
            for (k, v) in ProbVector::softmax(logits.row(i)).as_slice().iter().enumerate() {
                p[(k, i)] = *v;
            }
        }
        Ok(p)
    };
    let mut norm = T::infinity();
    for step in 0..=config.steps {
        let p = predict(&w)?;
        // ∇W = Gᵀ (P - Q)ᵀ / m + λ W
        let grad = g.transpose().matmul(&p.sub(q.matrix())?.transpose())?.scale(T::one() / mm).add(&w.scale(lambda))?;
        norm = frobenius(&grad);
        if !norm.is_finite() {
            return Err(Error::Diverged { epoch: step, what: "softmax oracle" });
        }
        if norm < config.tolerance {
            return Ok(OracleResult { predictions: p, steps: step, grad_norm: norm });
        }
        w = w.sub(&grad.scale(lr))?;
    }
    Err(Error::NotConverged { steps: config.steps, residual: norm.as_f64() })
}
