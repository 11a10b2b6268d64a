//! In-context example pool and nearest-neighbour retrieval.

use std::io::BufRead;
use std::path::Path;

use candidate_distill::{CandidateSet, LabelSpace};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_POOL_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoolLabel {
    Single(usize),
    Candidates(CandidateSet),
}

impl PoolLabel {
    /// The single label, or the lowest candidate.
    pub fn primary(&self) -> usize {
        match self {
            PoolLabel::Single(l) => *l,
            PoolLabel::Candidates(s) => s.labels()[0],
        }
    }

    pub fn as_set(&self, num_classes: usize) -> CandidateSet {
        match self {
            PoolLabel::Single(l) => CandidateSet::singleton(*l, num_classes).expect("validated label"),
            PoolLabel::Candidates(s) => s.clone(),
        }
    }

    fn max_label(&self) -> usize {
        match self {
            PoolLabel::Single(l) => *l,
            PoolLabel::Candidates(s) => s.max_label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub id: String,
    pub text: String,
    pub label: PoolLabel,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExamplePool {
    entries: Vec<PoolEntry>,
}

impl ExamplePool {
    pub fn new(entries: Vec<PoolEntry>, label_space: &LabelSpace) -> Result<Self> {
        if let Some(first) = entries.first() {
            let d = first.embedding.len();
            for e in &entries {
                if e.embedding.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: e.embedding.len() });
                }
                label_space.check_label(e.label.max_label())?;
            }
        }
        Ok(Self { entries })
    }

    /// Reads one JSON entry per line, keeping at most `max_size` entries.
    pub fn read_from(reader: impl BufRead, label_space: &LabelSpace, max_size: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if entries.len() == max_size {
                log::warn!("example pool truncated to {max_size} entries");
                break;
            }
            let entry: PoolEntry =
                serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            entries.push(entry);
        }
        Self::new(entries, label_space)
    }

    pub fn load(path: impl AsRef<Path>, label_space: &LabelSpace, max_size: usize) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), label_space, max_size)
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.first().map(|e| e.embedding.len())
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroEmbedding);
    }
    Ok(dot / (na * nb))
}

/// The `k` entries most cosine-similar to `query`, most similar first; equal
/// similarities keep pool order.
pub fn retrieve_few_shot<'a>(query: &[f64], pool: &'a ExamplePool, k: usize) -> Result<Vec<(usize, &'a PoolEntry)>> {
    if k > pool.len() {
        return Err(Error::PoolTooSmall { k, size: pool.len() });
    }
    let mut scored = pool
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| Ok((cosine(query, &e.embedding)?, i)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, i)| (i, &pool.entries[i])).collect())
}
