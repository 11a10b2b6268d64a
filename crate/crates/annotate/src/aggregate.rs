//! Combining repeated annotations of one sample.

use candidate_distill::CandidateSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScMode {
    /// The `k` most frequent labels.
    TopK(usize),
    /// Every label that appears at least once.
    All,
}

impl std::str::FromStr for ScMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "all" {
            return Ok(ScMode::All);
        }
        let k = s.strip_prefix("top").unwrap_or(&s);
        match k.parse::<usize>() {
            Ok(k) if k > 0 => Ok(ScMode::TopK(k)),
            _ => Err(Error::Config(format!("self-consistency mode {s:?}: expected `all` or a positive k"))),
        }
    }
}

/// How many of the sets contain each label.
pub fn label_frequencies(sets: &[CandidateSet], num_classes: usize) -> Vec<usize> {
    let mut freq = vec![0; num_classes];
    for s in sets {
        for l in s.iter() {
            freq[l] += 1;
        }
    }
    freq
}

/// Self-consistency aggregation. `TopK(k)` returns fewer than `k` labels when
/// fewer distinct labels appear; frequency ties go to the lower index.
pub fn sc_aggregate(sets: &[CandidateSet], mode: ScMode, num_classes: usize) -> Result<CandidateSet> {
    if sets.is_empty() {
        return Err(Error::Config("self-consistency needs at least one set".into()));
    }
    let freq = label_frequencies(sets, num_classes);
    let mut present: Vec<usize> = (0..num_classes).filter(|&c| freq[c] > 0).collect();
    if let ScMode::TopK(k) = mode {
        present.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(a.cmp(&b)));
        present.truncate(k);
    }
    Ok(CandidateSet::new(present, num_classes)?)
}

/// The most frequent label across `sets`, lower index on ties.
pub fn majority_vote(sets: &[CandidateSet], num_classes: usize) -> Result<usize> {
    if sets.is_empty() {
        return Err(Error::Config("majority vote needs at least one set".into()));
    }
    let freq = label_frequencies(sets, num_classes);
    let best = *freq.iter().max().expect("num_classes > 0");
    Ok(freq.iter().position(|&f| f == best).expect("max exists"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;

    fn s(labels: &[usize]) -> CandidateSet {
        CandidateSet::new(labels.iter().copied(), 4).unwrap()
    }

    #[test]
    fn plurality() {
        assert_eq!(sc_aggregate(&[s(&[A]), s(&[A]), s(&[B])], ScMode::TopK(1), 4).unwrap(), s(&[A]));
    }

    #[test]
    fn all_appearing_labels() {
        assert_eq!(sc_aggregate(&[s(&[A, B]), s(&[B, C])], ScMode::All, 4).unwrap(), s(&[A, B, C]));
    }

    #[test]
    fn frequency_ties_go_low() {
        // A:3, B:3, C:1
        let sets = [s(&[A, B]), s(&[A, B]), s(&[A, B, C])];
        assert_eq!(sc_aggregate(&sets, ScMode::TopK(1), 4).unwrap(), s(&[A]));
        assert_eq!(sc_aggregate(&sets, ScMode::TopK(2), 4).unwrap(), s(&[A, B]));
    }

    #[test]
    fn k_beyond_distinct_labels_truncates() {
        assert_eq!(sc_aggregate(&[s(&[C])], ScMode::TopK(3), 4).unwrap(), s(&[C]));
    }

    #[test]
    fn majority() {
        assert_eq!(majority_vote(&[s(&[A, B]), s(&[A]), s(&[C])], 4).unwrap(), A);
        assert_eq!(majority_vote(&[s(&[B]), s(&[B])], 4).unwrap(), B);
        assert_eq!(majority_vote(&[s(&[A]), s(&[B])], 4).unwrap(), A);
        assert!(majority_vote(&[], 4).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("all".parse::<ScMode>().unwrap(), ScMode::All);
        assert_eq!("3".parse::<ScMode>().unwrap(), ScMode::TopK(3));
        assert_eq!("top2".parse::<ScMode>().unwrap(), ScMode::TopK(2));
        assert!("0".parse::<ScMode>().is_err());
    }
}
