//! Label space and candidate sets.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered category names; label `i` is `names[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    descriptions: Option<Vec<String>>,
}

impl LabelSpace {
    pub fn new(names: Vec<String>) -> Result<Self> {
        Self::with_descriptions(names, None)
    }

    pub fn with_descriptions(names: Vec<String>, descriptions: Option<Vec<String>>) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::TooFewClasses(names.len()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.trim().to_lowercase()) {
                return Err(Error::DuplicateCategory(name.clone()));
            }
        }
        if let Some(d) = &descriptions {
            if d.len() != names.len() {
                return Err(Error::LengthMismatch { left: names.len(), right: d.len() });
            }
        }
        Ok(Self { names, descriptions })
    }

    /// `class0 .. class{C-1}`.
    pub fn numbered(num_classes: usize) -> Result<Self> {
        Self::new((0..num_classes).map(|c| format!("class{c}")).collect())
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, label: usize) -> &str {
        &self.names[label]
    }

    pub fn descriptions(&self) -> Option<&[String]> {
        self.descriptions.as_deref()
    }

    pub fn check_label(&self, label: usize) -> Result<()> {
        check_label(label, self.num_classes())
    }

    /// Re-runs the constructor invariants; used after deserializing.
    pub fn validate(&self) -> Result<()> {
        Self::with_descriptions(self.names.clone(), self.descriptions.clone()).map(|_| ())
    }
}

pub(crate) fn check_label(label: usize, num_classes: usize) -> Result<()> {
    if label < num_classes {
        Ok(())
    } else {
        Err(Error::LabelOutOfRange { label, num_classes })
    }
}

/// Nonempty, sorted, deduplicated set of label indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct CandidateSet {
    labels: Vec<usize>,
}

impl CandidateSet {
    pub fn new(labels: impl IntoIterator<Item = usize>, num_classes: usize) -> Result<Self> {
        let mut labels: Vec<usize> = labels.into_iter().collect();
        for &l in &labels {
            check_label(l, num_classes)?;
        }
        labels.sort_unstable();
        labels.dedup();
        if labels.is_empty() {
            return Err(Error::EmptyCandidateSet);
        }
        Ok(Self { labels })
    }

    pub fn singleton(label: usize, num_classes: usize) -> Result<Self> {
        Self::new([label], num_classes)
    }

    pub fn full(num_classes: usize) -> Self {
        Self { labels: (0..num_classes).collect() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false; candidate sets are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_singleton(&self) -> bool {
        self.labels.len() == 1
    }

    pub fn contains(&self, label: usize) -> bool {
        self.labels.binary_search(&label).is_ok()
    }

    /// Largest label index; used for range checks against a label space.
    pub fn max_label(&self) -> usize {
        *self.labels.last().expect("nonempty")
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().copied()
    }
}

impl<'de> Deserialize<'de> for CandidateSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        CandidateSet::new(raw, usize::MAX).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_set_sorts_and_dedups() {
        let s = CandidateSet::new([3, 1, 3], 4).unwrap();
        assert_eq!(s.labels(), &[1, 3]);
        assert!(s.contains(3));
        assert!(!s.contains(2));
    }

    #[test]
    fn candidate_set_rejects_empty_and_out_of_range() {
        assert!(matches!(CandidateSet::new([], 4), Err(Error::EmptyCandidateSet)));
        assert!(matches!(CandidateSet::new([4], 4), Err(Error::LabelOutOfRange { label: 4, num_classes: 4 })));
    }

    #[test]
    fn label_space_rejects_case_folded_duplicates() {
        let err = LabelSpace::new(vec!["Sports".into(), " sports ".into()]).unwrap_err();
        assert!(matches!(err, Error::DuplicateCategory(_)));
        assert!(matches!(LabelSpace::new(vec!["a".into()]), Err(Error::TooFewClasses(1))));
    }
}
