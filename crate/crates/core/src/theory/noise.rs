//! Label-flip matrices and the noise-tolerance conditions for single-label and
//! top-2 distillation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::linalg::Matrix;

/// Row-stochastic `R` with `R[c][c']` the probability that true class `c` is
/// observed as `c'`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrix<T> {
    r: Matrix<T>,
}

impl<T: Scalar> NoiseMatrix<T> {
    pub fn new(r: Matrix<T>) -> Result<Self> {
        if r.rows() != r.cols() {
            return Err(Error::DimensionMismatch { expected: r.rows(), got: r.cols() });
        }
        if r.rows() < 2 {
            return Err(Error::TooFewClasses(r.rows()));
        }
        for c in 0..r.rows() {
            let row = r.row(c);
            if row.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
                return Err(Error::InvalidProbVector(format!("noise row {c} has a negative entry")));
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > T::of(1e-9).max(T::epsilon() * T::of(16.0)) {
                return Err(Error::InvalidProbVector(format!("noise row {c} sums to {sum}")));
            }
        }
        Ok(Self { r })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(num_classes: usize) -> Result<Self> {
        Self::new(Matrix::identity(num_classes))
    }

    /// `1-ρ` on the diagonal and `ρ/(C-1)` elsewhere.
    pub fn symmetric(num_classes: usize, rho: T) -> Result<Self> {
        if !(rho >= T::zero() && rho <= T::one()) {
            return Err(Error::InvalidArgument(format!("noise rate {rho} outside [0, 1]")));
        }
        if num_classes < 2 {
            return Err(Error::TooFewClasses(num_classes));
        }
        let off = rho / T::of_usize(num_classes - 1);
        Self::new(Matrix::from_fn(num_classes, num_classes, |i, j| if i == j { T::one() - rho } else { off }))
    }

    pub fn num_classes(&self) -> usize {
        self.r.rows()
    }

    pub fn get(&self, from: usize, to: usize) -> T {
        self.r[(from, to)]
    }

    pub fn row(&self, c: usize) -> &[T] {
        self.r.row(c)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.r
    }

    /// Mean off-diagonal mass per row.
    pub fn noise_rate(&self) -> T {
        let c = self.num_classes();
        T::one() - (0..c).map(|i| self.get(i, i)).sum::<T>() / T::of_usize(c)
    }

    /// The most likely wrong observation for class `c`, lowest index on ties,
    /// and whether a tie occurred.
    pub fn runner_up(&self, c: usize) -> (usize, bool) {
        let mut best: Option<usize> = None;
        let mut tied = false;
        for k in (0..self.num_classes()).filter(|&k| k != c) {
            match best {
                None => best = Some(k),
                Some(b) if self.get(c, k) > self.get(c, b) => {
                    best = Some(k);
                    tied = false;
                }
                Some(b) if self.get(c, k) == self.get(c, b) => tied = true,
                _ => {}
            }
        }
        (best.expect("at least two classes"), tied)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Top1,
    Top2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub class: usize,
    pub confused_with: usize,
    /// `R[c][c'] + Σ_{i≠c} R[c][i]`.
    pub lhs: f64,
    pub threshold: f64,
    /// `threshold - lhs`; positive iff the pair passes.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub kind: ConditionKind,
    pub threshold: f64,
    pub pairs: Vec<PairCheck>,
    pub pass: bool,
    /// Set when `φ ≤ θ`, which leaves no admissible noise level.
    pub unsatisfiable: bool,
    /// Rows with `R[c][c] + max_{c'≠c} R[c][c'] ≥ 1`: the top-2 student's target
    /// puts equal class-mean mass on the true class and its runner-up there.
    pub degenerate_rows: Vec<usize>,
}

impl ConditionReport {
    pub fn violations(&self) -> impl Iterator<Item = &PairCheck> {
        self.pairs.iter().filter(|p| !p.pass)
    }
}

fn check_pairs<T: Scalar>(r: &NoiseMatrix<T>, threshold: T) -> Vec<PairCheck> {
    let c = r.num_classes();
    let mut pairs = Vec::with_capacity(c * (c - 1));
    for i in 0..c {
        let off: T = (0..c).filter(|&k| k != i).map(|k| r.get(i, k)).sum();
        for j in (0..c).filter(|&j| j != i) {
            let lhs = r.get(i, j) + off;
            pairs.push(PairCheck {
                class: i,
                confused_with: j,
                lhs: lhs.as_f64(),
                threshold: threshold.as_f64(),
                margin: (threshold - lhs).as_f64(),
                pass: lhs < threshold,
            });
        }
    }
    pairs
}

fn degenerate_rows<T: Scalar>(r: &NoiseMatrix<T>) -> Vec<usize> {
    (0..r.num_classes())
        .filter(|&c| {
            let (runner, _) = r.runner_up(c);
            r.get(c, c) + r.get(c, runner) >= T::one()
        })
        .collect()
}

/// Single-label condition: every pair needs `R[c][c'] + Σ_{i≠c} R[c][i] < 1 - θ/(φ-θ)`.
pub fn condition_top1<T: Scalar>(r: &NoiseMatrix<T>, theta: T, phi: T) -> ConditionReport {
    if !(phi > theta) {
        let pairs = check_pairs(r, T::neg_infinity());
        return ConditionReport {
            kind: ConditionKind::Top1,
            threshold: f64::NEG_INFINITY,
            pairs,
            pass: false,
            unsatisfiable: true,
            degenerate_rows: Vec::new(),
        };
    }
    let threshold = T::one() - theta / (phi - theta);
    let pairs = check_pairs(r, threshold);
    ConditionReport {
        kind: ConditionKind::Top1,
        threshold: threshold.as_f64(),
        pass: pairs.iter().all(|p| p.pass),
        pairs,
        unsatisfiable: false,
        degenerate_rows: Vec::new(),
    }
}

/// Top-2 condition: every pair needs `R[c][c'] + Σ_{i≠c} R[c][i] < 1`, i.e. a
/// strictly dominant diagonal.
pub fn condition_top2<T: Scalar>(r: &NoiseMatrix<T>) -> ConditionReport {
    let pairs = check_pairs(r, T::one());
    ConditionReport {
        kind: ConditionKind::Top2,
        threshold: 1.0,
        pass: pairs.iter().all(|p| p.pass),
        pairs,
        unsatisfiable: false,
        degenerate_rows: degenerate_rows(r),
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            ConditionKind::Top1 => "top-1",
            ConditionKind::Top2 => "top-2",
        };
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        if self.unsatisfiable {
            return writeln!(f, "{name}: {verdict} (unsatisfiable: phi <= theta)");
        }
        writeln!(f, "{name}: {verdict} (threshold {:.6})", self.threshold)?;
        for p in self.violations() {
            writeln!(
                f,
                "  violated ({}, {}): {:.6} >= {:.6}, margin {:.6}",
                p.class, p.confused_with, p.lhs, p.threshold, p.margin
            )?;
        }
        if self.pass {
            let tightest = self.pairs.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
            writeln!(f, "  smallest margin {tightest:.6}")?;
        }
        for c in &self.degenerate_rows {
            writeln!(f, "  warning: row {c} ties the true class with its runner-up in the top-2 target")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THETA: f64 = 0.2 / 2.2;
    const PHI: f64 = 1.0 - 2.0 / 32.2;

    #[test]
    fn zero_noise_passes_both() {
        let r = NoiseMatrix::<f64>::identity(3).unwrap();
        assert!(condition_top1(&r, THETA, PHI).pass);
        assert!(condition_top2(&r).pass);
    }

    #[test]
    fn two_class_band() {
        let r = NoiseMatrix::symmetric(2, 0.3).unwrap();
        let c1 = condition_top1(&r, THETA, PHI);
        assert!(c1.pass);
        assert!((c1.pairs[0].lhs - 0.6).abs() < 1e-12);
        assert!((c1.threshold - 0.89267).abs() < 1e-5);

        let r = NoiseMatrix::symmetric(2, 0.48).unwrap();
        let c1 = condition_top1(&r, THETA, PHI);
        assert!(!c1.pass);
        assert!((c1.pairs[0].lhs - 0.96).abs() < 1e-12);
        assert!(condition_top2(&r).pass);
        assert!(c1.to_string().contains("violated (0, 1)"));
    }

    #[test]
    fn top2_boundary_and_zero_diagonal() {
        assert!(!condition_top2(&NoiseMatrix::symmetric(2, 0.5).unwrap()).pass);
        let r = NoiseMatrix::from_rows(&[vec![0.0, 0.6, 0.4], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert!(!condition_top2(&r).pass);
    }

    #[test]
    fn unsatisfiable_when_phi_not_above_theta() {
        let r = NoiseMatrix::<f64>::identity(2).unwrap();
        let rep = condition_top1(&r, 0.5, 0.5);
        assert!(rep.unsatisfiable && !rep.pass);
        assert!(rep.to_string().contains("unsatisfiable"));
    }

    #[test]
    fn degenerate_rows_flagged() {
        let rep = condition_top2(&NoiseMatrix::<f64>::symmetric(2, 0.2).unwrap());
        assert_eq!(rep.degenerate_rows, vec![0, 1]);
        let rep = condition_top2(&NoiseMatrix::<f64>::symmetric(4, 0.2).unwrap());
        assert!(rep.degenerate_rows.is_empty());
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(NoiseMatrix::from_rows(&[vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
        assert!(NoiseMatrix::from_rows(&[vec![1.2, -0.2], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn runner_up_ties_to_lowest() {
        let r = NoiseMatrix::<f64>::symmetric(4, 0.3).unwrap();
        assert_eq!(r.runner_up(0), (1, true));
        assert_eq!(r.runner_up(2), (0, true));
    }
}
