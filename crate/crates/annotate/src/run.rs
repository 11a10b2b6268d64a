//! Annotating a dataset: prompt, query, parse and aggregate each sample.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use candidate_distill::{CandidateSet, Dataset, Sample};
use serde::{Deserialize, Serialize};

use crate::aggregate::{majority_vote, sc_aggregate, ScMode};
use crate::client::{ChatClient, ChatRequest, LlmClientConfig, ReplayEntry, ReplayLog};
use crate::error::{Error, Result};
use crate::parse::{parse_candidates, parse_single, LabelMatcher};
use crate::pool::{retrieve_few_shot, ExamplePool};
use crate::prompt::{build_prompt, PromptKind, PromptStrategy};

pub const DEFAULT_FEW_SHOT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub sample_id: String,
    pub strategy: PromptKind,
    pub raw_responses: Vec<String>,
    pub parsed: CandidateSet,
    pub few_shot_ids: Vec<String>,
}

/// One line of an annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationLine {
    pub id: String,
    pub strategy: PromptKind,
    pub candidates: Vec<usize>,
    pub raw: Vec<String>,
}

impl From<&AnnotationRecord> for AnnotationLine {
    fn from(r: &AnnotationRecord) -> Self {
        Self {
            id: r.sample_id.clone(),
            strategy: r.strategy,
            candidates: r.parsed.labels().to_vec(),
            raw: r.raw_responses.clone(),
        }
    }
}

#[derive(Debug)]
pub struct SampleError {
    pub sample_id: String,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct AnnotationRun {
    /// Successful records in dataset order.
    pub records: Vec<AnnotationRecord>,
    /// Failures in dataset order.
    pub errors: Vec<SampleError>,
}

impl AnnotationRun {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, &AnnotationLine::from(r))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn candidates(&self) -> HashMap<String, CandidateSet> {
        self.records.iter().map(|r| (r.sample_id.clone(), r.parsed.clone())).collect()
    }
}

pub fn read_annotations(reader: impl BufRead) -> Result<Vec<AnnotationLine>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

/// Candidate sets from an annotation file, validated against `num_classes`.
pub fn load_annotations(path: impl AsRef<Path>, num_classes: usize) -> Result<HashMap<String, CandidateSet>> {
    let lines = read_annotations(std::io::BufReader::new(std::fs::File::open(path)?))?;
    let mut out = HashMap::with_capacity(lines.len());
    for l in lines {
        let set = CandidateSet::new(l.candidates, num_classes)?;
        if out.insert(l.id.clone(), set).is_some() {
            return Err(candidate_distill::Error::DuplicateId(l.id).into());
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
pub struct Annotator<'a> {
    pub strategy: &'a PromptStrategy,
    pub client: &'a dyn ChatClient,
    pub matcher: &'a LabelMatcher,
    pub config: &'a LlmClientConfig,
    pub pool: Option<&'a ExamplePool>,
    pub few_shot: usize,
    /// Aggregation of several candidate-set responses.
    pub sc_mode: ScMode,
    pub log: Option<&'a ReplayLog>,
}

impl<'a> Annotator<'a> {
    pub fn new(
        strategy: &'a PromptStrategy,
        client: &'a dyn ChatClient,
        matcher: &'a LabelMatcher,
        config: &'a LlmClientConfig,
    ) -> Self {
        Self {
            strategy,
            client,
            matcher,
            config,
            pool: None,
            few_shot: DEFAULT_FEW_SHOT,
            sc_mode: ScMode::All,
            log: None,
        }
    }

    /// Annotates every sample with up to `max_concurrency` requests in flight.
    /// Per-sample failures are collected and do not stop the run.
    pub fn run(&self, dataset: &Dataset) -> Result<AnnotationRun> {
        self.config.validate()?;
        let n = dataset.len();
        let slots: Mutex<Vec<Option<Result<AnnotationRecord>>>> = Mutex::new((0..n).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.config.max_concurrency.min(n).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let outcome = self.annotate_one(dataset, &dataset.samples()[i], dataset.candidates()[i].as_ref());
                    slots.lock().expect("result slots poisoned")[i] = Some(outcome);
                });
            }
        });
        let mut run = AnnotationRun::default();
        for (sample, slot) in dataset.samples().iter().zip(slots.into_inner().expect("result slots poisoned")) {
            match slot.expect("every index visited") {
                Ok(r) => run.records.push(r),
                Err(error) => run.errors.push(SampleError { sample_id: sample.id.clone(), error }),
            }
        }
        Ok(run)
    }

    pub fn annotate_one(
        &self,
        dataset: &Dataset,
        sample: &Sample,
        given: Option<&CandidateSet>,
    ) -> Result<AnnotationRecord> {
        let examples = match self.pool {
            Some(pool) if self.few_shot > 0 && !pool.is_empty() => {
                retrieve_few_shot(&sample.features, pool, self.few_shot.min(pool.len()))?
            }
            _ => Vec::new(),
        };
        let few_shot_ids = examples.iter().map(|(_, e)| e.id.clone()).collect();
        let entries: Vec<_> = examples.iter().map(|(_, e)| *e).collect();
        let prompt =
            build_prompt(&sample.id, sample.text.as_deref(), self.strategy, dataset.label_space(), &entries, given)?;
        let request = ChatRequest {
            sample_id: sample.id.clone(),
            prompt,
            temperature: self.config.effective_temperature(),
            n: self.config.n_samples,
        };
        let responses = self.request_with_retry(&request)?;
        if let Some(log) = self.log {
            log.append(&ReplayEntry {
                sample_id: request.sample_id.clone(),
                prompt: request.prompt.clone(),
                responses: responses.clone(),
            })?;
        }
        let parsed = self.aggregate(&responses)?;
        Ok(AnnotationRecord {
            sample_id: sample.id.clone(),
            strategy: self.strategy.kind,
            raw_responses: responses,
            parsed,
            few_shot_ids,
        })
    }

    fn request_with_retry(&self, request: &ChatRequest) -> Result<Vec<String>> {
        let mut attempt = 0;
        loop {
            match self.client.complete(request) {
                Ok(r) if r.is_empty() => return Err(Error::BadResponse("no completions returned".into())),
                Ok(r) => return Ok(r),
                Err(e) if e.is_transient() && attempt < self.config.retry => {
                    attempt += 1;
                    log::warn!("{}: attempt {attempt} failed: {e}", request.sample_id);
                    std::thread::sleep(Duration::from_millis(self.config.retry_backoff_ms * attempt as u64));
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Parses each response; unparseable ones are dropped unless all fail.
    fn aggregate(&self, responses: &[String]) -> Result<CandidateSet> {
        let c = self.matcher.num_classes();
        let mut sets = Vec::with_capacity(responses.len());
        let mut first_error = None;
        for r in responses {
            let parsed = if self.strategy.kind.is_single() {
                parse_single(r, self.matcher).and_then(|l| Ok(CandidateSet::singleton(l, c)?))
            } else {
                parse_candidates(r, self.matcher)
            };
            match parsed {
                Ok(s) => sets.push(s),
                Err(e) => {
                    log::debug!("unparseable response: {e}");
                    first_error.get_or_insert(e);
                }
            }
        }
        if sets.is_empty() {
            return Err(first_error.unwrap_or_else(|| Error::NoLabelFound(String::new())));
        }
        if sets.len() == 1 {
            return Ok(sets.pop().expect("one set"));
        }
        if self.strategy.kind.is_single() {
            Ok(CandidateSet::singleton(majority_vote(&sets, c)?, c)?)
        } else {
            sc_aggregate(&sets, self.sc_mode, c)
        }
    }
}
