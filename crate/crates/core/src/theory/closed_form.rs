//! Predictions of the linearized model in closed form, and the per-sample
//! decomposition into own, class-mean and global-mean targets.

use crate::error::{Error, Result};
use crate::prob::ProbVector;
use crate::scalar::Scalar;

use super::linalg::{Cholesky, Matrix};
use super::params::{Shrinkage, TheoryParams};

/// Labels `i mod C`, so every class holds `m/C` samples when `C | m`.
pub fn balanced_labels(num_samples: usize, num_classes: usize) -> Vec<usize> {
    (0..num_samples).map(|i| i % num_classes).collect()
}

pub fn is_balanced(labels: &[usize], num_classes: usize) -> bool {
    let mut counts = vec![0usize; num_classes];
    for &y in labels {
        if y >= num_classes {
            return false;
        }
        counts[y] += 1;
    }
    counts.iter().all(|&n| n == counts[0])
}

/// Unit diagonal, `intra` within a class, `inter` across classes.
pub fn build_similarity<T: Scalar>(labels: &[usize], intra: T, inter: T) -> Matrix<T> {
    let m = labels.len();
    Matrix::from_fn(m, m, |i, j| {
        if i == j {
            T::one()
        } else if labels[i] == labels[j] {
            intra
        } else {
            inter
        }
    })
}

/// Per-sample target distributions stored as the columns of a `C × m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix<T> {
    q: Matrix<T>,
}

impl<T: Scalar> TargetMatrix<T> {
    pub fn from_columns(columns: &[ProbVector<T>]) -> Result<Self> {
        let c = columns.first().ok_or(Error::EmptyInput("target columns"))?.len();
        if let Some(bad) = columns.iter().find(|q| q.len() != c) {
            return Err(Error::DimensionMismatch { expected: c, got: bad.len() });
        }
        Ok(Self { q: Matrix::from_fn(c, columns.len(), |i, j| columns[j].get(i)) })
    }

    pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Self> {
        let cols: Vec<_> = labels
            .iter()
            .map(|&y| {
                if y < num_classes {
                    Ok(ProbVector::one_hot(y, num_classes))
                } else {
                    Err(Error::LabelOutOfRange { label: y, num_classes })
                }
            })
            .collect::<Result<_>>()?;
        Self::from_columns(&cols)
    }

    /// Validates every column as a distribution.
    pub fn from_matrix(q: Matrix<T>) -> Result<Self> {
        for j in 0..q.cols() {
            ProbVector::new(q.column(j))?;
        }
        Ok(Self { q })
    }

    pub fn num_classes(&self) -> usize {
        self.q.rows()
    }

    pub fn num_samples(&self) -> usize {
        self.q.cols()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn column(&self, j: usize) -> ProbVector<T> {
        ProbVector::from_raw_unchecked(self.q.column(j))
    }

    pub fn global_mean(&self) -> ProbVector<T> {
        let m = T::of_usize(self.num_samples());
        ProbVector::from_raw_unchecked(
            (0..self.num_classes()).map(|c| self.q.row(c).iter().copied().sum::<T>() / m).collect(),
        )
    }

    /// True when the mean column is uniform within `1e-6`.
    pub fn is_balanced(&self) -> bool {
        let u = T::one() / T::of_usize(self.num_classes());
        self.global_mean().as_slice().iter().all(|&x| (x - u).abs() <= T::of(1e-6))
    }

    /// Mean target column of each class under `labels`.
    pub fn class_means(&self, labels: &[usize]) -> Result<Vec<ProbVector<T>>> {
        let (c, m) = (self.num_classes(), self.num_samples());
        if labels.len() != m {
            return Err(Error::LengthMismatch { left: m, right: labels.len() });
        }
        let mut sums = vec![vec![T::zero(); c]; c];
        let mut counts = vec![0usize; c];
        for (j, &y) in labels.iter().enumerate() {
            if y >= c {
                return Err(Error::LabelOutOfRange { label: y, num_classes: c });
            }
            counts[y] += 1;
            for k in 0..c {
                sums[y][k] += self.q[(k, j)];
            }
        }
        Ok(sums
            .into_iter()
            .zip(counts)
            .map(|(s, n)| {
                if n == 0 {
                    ProbVector::uniform(c)
                } else {
                    let n = T::of_usize(n);
                    ProbVector::from_raw_unchecked(s.into_iter().map(|x| x / n).collect())
                }
            })
            .collect())
    }
}

fn uniform_like<T: Scalar>(q: &Matrix<T>) -> Matrix<T> {
    Matrix::filled(q.rows(), q.cols(), T::one() / T::of_usize(q.rows()))
}

/// `I + S/(Cmλ)`, symmetric positive definite whenever `S` is.
fn regularized_gram<T: Scalar>(s: &Matrix<T>, num_classes: usize, lambda: T) -> Matrix<T> {
    let k = T::of_usize(num_classes) * T::of_usize(s.rows()) * lambda;
    Matrix::identity(s.rows()).add(&s.scale(T::one() / k)).expect("square")
}

/// `P = U + (Q - U)(I - (I + S/(Cmλ))⁻¹)` with `U` the uniform matrix; columns of
/// `P` sum to one.
pub fn closed_form_predictions<T: Scalar>(q: &TargetMatrix<T>, s: &Matrix<T>, lambda: T) -> Result<Matrix<T>> {
    let m = q.num_samples();
    if s.rows() != m || s.cols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: s.rows() });
    }
    if !(lambda > T::zero()) {
        return Err(Error::InvalidParams(format!("lambda {lambda} must be positive")));
    }
    let chol = Cholesky::new(&regularized_gram(s, q.num_classes(), lambda))?;
    let centered = q.matrix().sub(&uniform_like(q.matrix()))?;
    // (Q-U) M⁻¹ = (M⁻¹ (Q-U)ᵀ)ᵀ since M is symmetric.
    let damped = chol.solve(&centered.transpose())?.transpose();
    q.matrix().sub(&damped)
}

/// `I - (I + S/(Cmλ))⁻¹` by explicit inversion.
pub fn shrinkage_operator<T: Scalar>(s: &Matrix<T>, num_classes: usize, lambda: T) -> Result<Matrix<T>> {
    let inv = Cholesky::new(&regularized_gram(s, num_classes, lambda))?.inverse();
    Matrix::identity(s.rows()).sub(&inv)
}

/// The same operator from `(θ, φ, ψ)` on a balanced labelling:
/// `(ψ-φ)/m · 𝟙𝟙ᵀ + (φ-θ)C/m · [same class] + θ I`.
pub fn analytic_shrinkage_operator<T: Scalar>(params: &TheoryParams<T>, labels: &[usize]) -> Result<Matrix<T>> {
    let m = labels.len();
    if m != params.num_samples {
        return Err(Error::LengthMismatch { left: params.num_samples, right: m });
    }
    if !is_balanced(labels, params.num_classes) {
        return Err(Error::InvalidArgument("analytic operator needs balanced labels".into()));
    }
    let Shrinkage { theta, phi, psi } = params.shrinkage();
    let (mm, c) = (T::of_usize(m), T::of_usize(params.num_classes));
    Ok(Matrix::from_fn(m, m, |i, j| {
        let mut v = (psi - phi) / mm;
        if labels[i] == labels[j] {
            v += (phi - theta) * c / mm;
        }
        if i == j {
            v += theta;
        }
        v
    }))
}

/// `θ q + (φ-θ) q̄_class + (1-φ)/C`, valid when the targets average to uniform.
pub fn quantified_prediction<T: Scalar>(
    q: &ProbVector<T>,
    class_mean: &ProbVector<T>,
    theta: T,
    phi: T,
) -> ProbVector<T> {
    let u = T::one() / T::of_usize(q.len());
    ProbVector::from_raw_unchecked(
        q.as_slice()
            .iter()
            .zip(class_mean.as_slice())
            .map(|(&qi, &mi)| theta * qi + (phi - theta) * mi + (T::one() - phi) * u)
            .collect(),
    )
}

/// As [`quantified_prediction`] with the global-mean term kept, exact for any
/// targets on a balanced labelling.
pub fn quantified_prediction_general<T: Scalar>(
    q: &ProbVector<T>,
    class_mean: &ProbVector<T>,
    global_mean: &ProbVector<T>,
    shrinkage: Shrinkage<T>,
) -> ProbVector<T> {
    let Shrinkage { theta, phi, psi } = shrinkage;
    let u = T::one() / T::of_usize(q.len());
    ProbVector::from_raw_unchecked(
        (0..q.len())
            .map(|k| {
                theta * q.get(k)
                    + (phi - theta) * class_mean.get(k)
                    + (psi - phi) * global_mean.get(k)
                    + (T::one() - psi) * u
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn similarity_blocks() {
        let labels = [0, 0, 1, 1];
        let s = build_similarity(&labels, 0.8, 0.2);
        let expect = Matrix::from_rows(&[
            vec![1.0, 0.8, 0.2, 0.2],
            vec![0.8, 1.0, 0.2, 0.2],
            vec![0.2, 0.2, 1.0, 0.8],
            vec![0.2, 0.2, 0.8, 1.0],
        ])
        .unwrap();
        assert_eq!(s, expect);
    }

    #[test]
    fn uniform_targets_are_a_fixed_point() {
        let labels = balanced_labels(6, 3);
        let s = build_similarity(&labels, 0.7, 0.1);
        let q = TargetMatrix::from_columns(&vec![ProbVector::uniform(3); 6]).unwrap();
        let p = closed_form_predictions(&q, &s, 0.05).unwrap();
        assert!(p.max_abs_diff(&Matrix::filled(3, 6, 1.0 / 3.0)).unwrap() < 1e-14);
    }

    #[test]
    fn heavy_regularization_gives_uniform() {
        let labels = balanced_labels(8, 2);
        let s = build_similarity(&labels, 0.8, 0.2);
        let q = TargetMatrix::one_hot(&labels, 2).unwrap();
        let p = closed_form_predictions(&q, &s, 1e8).unwrap();
        assert!(p.max_abs_diff(&Matrix::filled(2, 8, 0.5)).unwrap() < 1e-8);
    }

    #[test]
    fn clean_two_class_entry_matches_substitution() {
        // Class mean equals the noise row: true-class entry θ + (φ-θ)(1-ρ) + (1-φ)/2.
        let (theta, phi, rho) = (0.0909, 0.9379, 0.3);
        let p = quantified_prediction(
            &ProbVector::one_hot(0, 2),
            &ProbVector::new(vec![1.0 - rho, rho]).unwrap(),
            theta,
            phi,
        );
        assert_abs_diff_eq!(p.get(0), theta + (phi - theta) * (1.0 - rho) + (1.0 - phi) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn full_shrinkage_is_uniform() {
        let p = quantified_prediction(&ProbVector::one_hot(1, 4), &ProbVector::one_hot(2, 4), 0.0, 0.0);
        assert_eq!(p.as_slice(), &[0.25; 4]);
    }

    #[test]
    fn balance_flag() {
        let labels = balanced_labels(4, 2);
        assert!(TargetMatrix::<f64>::one_hot(&labels, 2).unwrap().is_balanced());
        assert!(!TargetMatrix::<f64>::one_hot(&[0, 0, 0, 1], 2).unwrap().is_balanced());
    }

    #[test]
    fn dimension_mismatch() {
        let q = TargetMatrix::<f64>::one_hot(&[0, 1], 2).unwrap();
        let s = Matrix::identity(3);
        assert!(closed_form_predictions(&q, &s, 0.1).is_err());
    }
}
