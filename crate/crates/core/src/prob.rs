//! Probability vectors and the elementary losses defined on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::CandidateSet;
use crate::scalar::Scalar;

/// A length-C distribution: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> ProbVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProbVector("empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidProbVector(format!("entry {v} is negative or not finite")));
        }
        let sum: T = values.iter().copied().sum();
        if (sum - T::one()).abs() > T::simplex_tolerance(values.len()) {
            return Err(Error::InvalidProbVector(format!("entries sum to {sum}")));
        }
        Ok(Self { values })
    }

    /// Normalizes nonnegative weights. Fails when the total mass is zero.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        let sum: T = weights.iter().copied().sum();
        if !(sum > T::zero()) || !sum.is_finite() {
            return Err(Error::InvalidProbVector(format!("total mass {sum}")));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(len: usize) -> Self {
        let v = T::one() / T::of_usize(len);
        Self { values: vec![v; len] }
    }

    pub fn one_hot(label: usize, len: usize) -> Self {
        let mut values = vec![T::zero(); len];
        values[label] = T::one();
        Self { values }
    }

    /// Uniform mass over the labels of `set`, zero elsewhere.
    pub fn uniform_over(set: &CandidateSet, len: usize) -> Self {
        let w = T::one() / T::of_usize(set.len());
        let mut values = vec![T::zero(); len];
        for l in set.iter() {
            values[l] = w;
        }
        Self { values }
    }

    /// Softmax of `logits`, computed with the max-shift.
    pub fn softmax(logits: &[T]) -> Self {
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        Self { values: exps.into_iter().map(|e| e / sum).collect() }
    }

    pub(crate) fn from_raw_unchecked(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, j: usize) -> T {
        self.values[j]
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }

    pub fn max(&self) -> T {
        self.values[self.argmax()]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.as_f64()).collect()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable log-softmax.
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

/// `l_ce(p, q) = -Σ_j q_j ln p_j`. Entries with `q_j = 0` contribute nothing.
pub fn cross_entropy<T: Scalar>(pred: &[T], target: &[T]) -> T {
    pred.iter()
        .zip(target)
        .filter(|(_, &q)| q > T::zero())
        .map(|(&p, &q)| -q * p.max(T::min_positive_value()).ln())
        .sum()
}

/// Cross-entropy evaluated from logits through log-softmax.
pub fn cross_entropy_logits<T: Scalar>(logits: &[T], target: &[T]) -> T {
    log_softmax(logits).into_iter().zip(target).filter(|(_, &q)| q > T::zero()).map(|(lp, &q)| -q * lp).sum()
}

/// `KL(p ‖ r) = Σ_j p_j ln(p_j / r_j)` with `0 ln 0 = 0`.
pub fn kl_divergence<T: Scalar>(p: &[T], r: &[T]) -> T {
    p.iter()
        .zip(r)
        .filter(|(&pj, _)| pj > T::zero())
        .map(|(&pj, &rj)| pj * (pj.ln() - rj.max(T::min_positive_value()).ln()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn validation_rejects_bad_vectors() {
        assert!(ProbVector::new(vec![0.5f64, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1f64, 1.1]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbVector::new(vec![0.25f64, 0.75]).is_ok());
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }

    #[test]
    fn uniform_prediction_one_hot_target_costs_ln_c() {
        let p = ProbVector::<f64>::uniform(4);
        let q = ProbVector::<f64>::one_hot(2, 4);
        assert_relative_eq!(cross_entropy(p.as_slice(), q.as_slice()), 4f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn kl_hand_value() {
        // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1)
        let expected = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert_relative_eq!(kl_divergence(&[0.5, 0.5], &[0.9, 0.1]), expected, epsilon = 1e-12);
        assert_relative_eq!(expected, 0.5108, epsilon = 1e-4);
    }

    #[test]
    fn logits_and_probability_cross_entropy_agree() {
        let z = [0.3f64, -1.2, 2.0];
        let q = [0.2, 0.0, 0.8];
        let p = ProbVector::softmax(&z);
        assert_relative_eq!(cross_entropy(p.as_slice(), &q), cross_entropy_logits(&z, &q), epsilon = 1e-12);
    }
}
