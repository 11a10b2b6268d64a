//! Samples, datasets and the line-delimited JSON dataset format.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{check_label, CandidateSet, LabelSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub text: Option<String>,
    pub features: Vec<f64>,
    /// Alternative views of the same sample (augmentations).
    pub aug_features: Option<Vec<Vec<f64>>>,
    /// Evaluation-only ground truth.
    pub gold: Option<usize>,
}

impl Sample {
    pub fn new(id: impl Into<String>, features: Vec<f64>) -> Self {
        Self { id: id.into(), text: None, features, aug_features: None, gold: None }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn with_gold(mut self, gold: usize) -> Self {
        self.gold = Some(gold);
        self
    }
}

/// One record of the dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetLine {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aug_features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    label_space: LabelSpace,
    samples: Vec<Sample>,
    /// Aligned with `samples`.
    candidates: Vec<Option<CandidateSet>>,
    index: HashMap<String, usize>,
}

impl Dataset {
    /// Validates every sample against `label_space` and a common feature dimension.
    pub fn new(label_space: LabelSpace, samples: Vec<Sample>) -> Result<Self> {
        let n = samples.len();
        Self::with_candidates(label_space, samples, vec![None; n])
    }

    pub fn with_candidates(
        label_space: LabelSpace,
        samples: Vec<Sample>,
        candidates: Vec<Option<CandidateSet>>,
    ) -> Result<Self> {
        if candidates.len() != samples.len() {
            return Err(Error::LengthMismatch { left: samples.len(), right: candidates.len() });
        }
        let c = label_space.num_classes();
        let dim = samples.first().map(|s| s.features.len());
        let mut index = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            validate_sample(s, dim.unwrap_or(0), c)?;
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        for set in candidates.iter().flatten() {
            check_label(set.max_label(), c)?;
        }
        Ok(Self { label_space, samples, candidates, index })
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn num_classes(&self) -> usize {
        self.label_space.num_classes()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Zero for an empty dataset.
    pub fn feature_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn candidates(&self) -> &[Option<CandidateSet>] {
        &self.candidates
    }

    pub fn candidates_of(&self, id: &str) -> Option<&CandidateSet> {
        self.index_of(id).and_then(|i| self.candidates[i].as_ref())
    }

    /// Replaces candidate sets from an id-keyed map. Ids not in the dataset are rejected;
    /// samples absent from the map end up without a candidate set.
    pub fn set_candidates(&mut self, map: HashMap<String, CandidateSet>) -> Result<()> {
        let mut aligned = vec![None; self.samples.len()];
        for (id, set) in map {
            let i = self.index_of(&id).ok_or_else(|| Error::UnknownSample(id.clone()))?;
            check_label(set.max_label(), self.num_classes())?;
            aligned[i] = Some(set);
        }
        self.candidates = aligned;
        Ok(())
    }

    /// Gold labels when every sample carries one.
    pub fn gold_labels(&self) -> Option<Vec<usize>> {
        self.samples.iter().map(|s| s.gold).collect()
    }

    pub fn to_lines(&self) -> Vec<DatasetLine> {
        self.samples
            .iter()
            .zip(&self.candidates)
            .map(|(s, cand)| DatasetLine {
                id: s.id.clone(),
                text: s.text.clone(),
                features: s.features.clone(),
                aug_features: s.aug_features.clone(),
                gold: s.gold,
                candidates: cand.as_ref().map(|c| c.labels().to_vec()),
            })
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for line in self.to_lines() {
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_from<R: Read>(reader: R, label_space: LabelSpace) -> Result<Self> {
        let c = label_space.num_classes();
        let mut samples = Vec::new();
        let mut candidates = Vec::new();
        let mut seen = HashSet::new();
        let mut dim = None;
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DatasetLine =
                serde_json::from_str(&line).map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
            let d = *dim.get_or_insert(rec.features.len());
            let cand = rec.candidates.map(|l| CandidateSet::new(l, c)).transpose().map_err(|e| e.at_line(lineno))?;
            let sample = Sample {
                id: rec.id,
                text: rec.text,
                features: rec.features,
                aug_features: rec.aug_features,
                gold: rec.gold,
            };
            validate_sample(&sample, d, c).map_err(|e| e.at_line(lineno))?;
            if !seen.insert(sample.id.clone()) {
                return Err(Error::DuplicateId(sample.id).at_line(lineno));
            }
            samples.push(sample);
            candidates.push(cand);
        }
        Self::with_candidates(label_space, samples, candidates)
    }
}

fn validate_sample(s: &Sample, dim: usize, num_classes: usize) -> Result<()> {
    if s.features.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: s.features.len() });
    }
    if s.features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample {:?} has non-finite features", s.id)));
    }
    for view in s.aug_features.iter().flatten() {
        if view.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: view.len() });
        }
    }
    if let Some(g) = s.gold {
        check_label(g, num_classes)?;
    }
    Ok(())
}

/// Reads a dataset file: one JSON record per line.
pub fn load_dataset(path: impl AsRef<Path>, label_space: LabelSpace) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    Dataset::read_from(file, label_space)
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    dataset.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(c: usize) -> LabelSpace {
        LabelSpace::numbered(c).unwrap()
    }

    #[test]
    fn three_line_file_parses() {
        let text = r#"{"id":"a","features":[0.1,0.2,0.3,0.4],"gold":1}
{"id":"b","text":"where?","features":[1,2,3,4],"candidates":[4,2]}

{"id":"c","features":[0,0,0,0],"aug_features":[[1,1,1,1]]}
"#;
        let ds = Dataset::read_from(text.as_bytes(), space(6)).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.feature_dim(), 4);
        assert_eq!(ds.candidates_of("b").unwrap().labels(), &[2, 4]);
        assert!(ds.candidates_of("a").is_none());
    }

    #[test]
    fn out_of_range_candidate_reports_line() {
        let text = "{\"id\":\"a\",\"features\":[0]}\n{\"id\":\"b\",\"features\":[1],\"candidates\":[6]}\n";
        let err = Dataset::read_from(text.as_bytes(), space(6)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("label out of range"), "{msg}");
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let text = "{\"id\":\"a\",\"features\":[0]}\n{\"id\":\"a\",\"features\":[1]}\n";
        let err = Dataset::read_from(text.as_bytes(), space(6)).unwrap_err();
        assert!(err.to_string().contains("duplicate id"));
    }

    #[test]
    fn dimension_mismatch_and_malformed_lines() {
        let text = "{\"id\":\"a\",\"features\":[0,1]}\n{\"id\":\"b\",\"features\":[1]}\n";
        let err = Dataset::read_from(text.as_bytes(), space(3)).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"));
        let err = Dataset::read_from("{\"id\":1}\n".as_bytes(), space(3)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Dataset::read_from("{\"id\":\"a\",\"features\":[0],\"gold\":3}\n".as_bytes(), space(3)).unwrap_err();
        assert!(err.to_string().contains("label out of range"));
    }

    #[test]
    fn unknown_candidate_id_is_rejected() {
        let mut ds = Dataset::new(space(2), vec![Sample::new("x", vec![0.0])]).unwrap();
        let mut map = HashMap::new();
        map.insert("y".to_string(), CandidateSet::full(2));
        assert!(matches!(ds.set_candidates(map), Err(Error::UnknownSample(_))));
    }
}
