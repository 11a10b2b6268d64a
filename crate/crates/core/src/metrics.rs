//! Quality statistics for single and candidate annotations.
//!
//! For candidate sets `s_i` with gold labels `y_i` over `C` classes:
//!
//! ```text
//! 1-α = (1/n) Σ 𝕀[y_i ∈ s_i]
//! β   = (1/n) Σ (C - |s_i|) / (C - 1)
//! F1  = 2(1-α)β / (1-α+β)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::CandidateSet;

/// Gold-inclusion rate, i.e. `1 - α`.
pub fn alpha_error(candidates: &[CandidateSet], gold: &[usize]) -> Result<f64> {
    if candidates.len() != gold.len() {
        return Err(Error::LengthMismatch { left: candidates.len(), right: gold.len() });
    }
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidate sets"));
    }
    let hits = candidates.iter().zip(gold).filter(|(s, &y)| s.contains(y)).count();
    Ok(hits as f64 / candidates.len() as f64)
}

/// β-coverage: average fraction of the label space pruned away.
pub fn beta_coverage(candidates: &[CandidateSet], num_classes: usize) -> Result<f64> {
    if num_classes < 2 {
        return Err(Error::TooFewClasses(num_classes));
    }
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidate sets"));
    }
    let denom = (num_classes - 1) as f64;
    let mut total = 0.0;
    for s in candidates {
        if s.len() > num_classes {
            return Err(Error::LabelOutOfRange { label: s.max_label(), num_classes });
        }
        total += (num_classes - s.len()) as f64 / denom;
    }
    Ok(total / candidates.len() as f64)
}

pub fn f1_score(one_minus_alpha: f64, beta: f64) -> f64 {
    let denom = one_minus_alpha + beta;
    if denom > 0.0 {
        2.0 * one_minus_alpha * beta / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub one_minus_alpha: f64,
    pub beta: f64,
    pub f1: f64,
    pub mean_set_size: f64,
    pub n: usize,
    /// Only defined when every set is a singleton.
    pub accuracy: Option<f64>,
}

impl AssessmentReport {
    pub const CSV_HEADER: &'static str = "dataset,strategy,n,one_minus_alpha,mean_set_size,beta,f1";

    pub fn csv_row(&self, dataset: &str, strategy: &str) -> String {
        format!(
            "{dataset},{strategy},{},{:.6},{:.6},{:.6},{:.6}",
            self.n, self.one_minus_alpha, self.mean_set_size, self.beta, self.f1
        )
    }
}

pub fn assess(candidates: &[CandidateSet], gold: &[usize], num_classes: usize) -> Result<AssessmentReport> {
    let one_minus_alpha = alpha_error(candidates, gold)?;
    let beta = beta_coverage(candidates, num_classes)?;
    let n = candidates.len();
    let mean_set_size = candidates.iter().map(|s| s.len() as f64).sum::<f64>() / n as f64;
    let accuracy = candidates.iter().all(CandidateSet::is_singleton).then_some(one_minus_alpha);
    Ok(AssessmentReport { one_minus_alpha, beta, f1: f1_score(one_minus_alpha, beta), mean_set_size, n, accuracy })
}

/// Fraction of hard predictions equal to gold.
pub fn accuracy(pred: &[usize], gold: &[usize]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: gold.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    Ok(pred.iter().zip(gold).filter(|(p, g)| p == g).count() as f64 / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sets(raw: &[&[usize]], c: usize) -> Vec<CandidateSet> {
        raw.iter().map(|s| CandidateSet::new(s.iter().copied(), c).unwrap()).collect()
    }

    #[test]
    fn alpha_error_extremes_and_hand_tally() {
        let s = sets(&[&[0], &[1, 2], &[3], &[0, 3]], 4);
        assert_eq!(alpha_error(&s, &[0, 1, 3, 3]).unwrap(), 1.0);
        assert_eq!(alpha_error(&s, &[1, 0, 0, 1]).unwrap(), 0.0);
        assert_eq!(alpha_error(&s, &[0, 2, 3, 1]).unwrap(), 0.75);
        assert!(matches!(alpha_error(&s, &[0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn beta_extremes() {
        let singles = sets(&[&[0], &[5], &[2]], 6);
        assert_eq!(beta_coverage(&singles, 6).unwrap(), 1.0);
        let full = vec![CandidateSet::full(6); 3];
        assert_eq!(beta_coverage(&full, 6).unwrap(), 0.0);
        assert!(beta_coverage(&singles, 1).is_err());
    }

    #[test]
    fn beta_at_mean_size_1_70() {
        // 7 sets of size 2 and 3 singletons: mean size 1.7 at C = 6.
        let mut s = vec![CandidateSet::new([0, 1], 6).unwrap(); 7];
        s.extend(vec![CandidateSet::singleton(2, 6).unwrap(); 3]);
        assert_abs_diff_eq!(beta_coverage(&s, 6).unwrap(), 0.86, epsilon = 1e-12);
    }

    #[test]
    fn f1_reported_aggregates() {
        assert_abs_diff_eq!(f1_score(0.8909, 0.86), 0.875, epsilon = 1e-3);
        assert_abs_diff_eq!(f1_score(0.7107, 1.0), 0.831, epsilon = 1e-3);
        assert_eq!(f1_score(0.0, 0.7), 0.0);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn perfect_singletons_report_all_ones() {
        let s = sets(&[&[0], &[1], &[2]], 3);
        let r = assess(&s, &[0, 1, 2], 3).unwrap();
        assert_eq!((r.one_minus_alpha, r.beta, r.f1), (1.0, 1.0, 1.0));
        assert_eq!(r.accuracy, Some(1.0));
        assert_eq!(r.csv_row("toy", "sa"), "toy,sa,3,1.000000,1.000000,1.000000,1.000000");
    }

    #[test]
    fn mixed_hand_built_instance() {
        // n = 5, C = 6
        let s = sets(&[&[0], &[1, 2], &[3, 4, 5], &[0, 1], &[2]], 6);
        let gold = [0, 2, 1, 1, 2];
        let r = assess(&s, &gold, 6).unwrap();
        // gold in sets 0, 1, 3, 4
        assert_abs_diff_eq!(r.one_minus_alpha, 0.8, epsilon = 1e-15);
        // sizes 1,2,3,2,1 -> (5+4+3+4+5)/(5*5)
        assert_abs_diff_eq!(r.beta, 21.0 / 25.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mean_set_size, 1.8, epsilon = 1e-15);
        assert_abs_diff_eq!(r.f1, 2.0 * 0.8 * 0.84 / 1.64, epsilon = 1e-15);
        assert_eq!(r.accuracy, None);
        assert!(assess(&[], &[], 6).is_err());
    }
}
