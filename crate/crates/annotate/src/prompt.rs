//! Prompt templates for single-label, candidate-set and selection queries.

use std::fmt;

use candidate_distill::{CandidateSet, LabelSpace};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parse::render_labels;
use crate::pool::PoolEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    /// One label.
    Sa,
    /// One label, plus alternatives when unsure.
    CaAdd,
    /// Every plausible label.
    CaAll,
    /// Pick one label from a given candidate set.
    Select,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Sa => "sa",
            PromptKind::CaAdd => "ca_add",
            PromptKind::CaAll => "ca_all",
            PromptKind::Select => "select",
        }
    }

    /// Whether the answer is reduced to a single label.
    pub fn is_single(self) -> bool {
        matches!(self, PromptKind::Sa | PromptKind::Select)
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sa" => Ok(PromptKind::Sa),
            "ca_add" => Ok(PromptKind::CaAdd),
            "ca_all" => Ok(PromptKind::CaAll),
            "select" => Ok(PromptKind::Select),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

pub const UNSURE_CLAUSE: &str = "If you are unsure about your answer, please include other potential choices.";
pub const SINGLE_CLAUSE: &str = "into one";
pub const ALL_CLAUSE: &str = "with all possible choices";

const SA_TEMPLATE: &str =
    "{preamble}{few_shot}Given a {item}: {text}\n{question} Please identify the {item} into one of the following types: {categories}.";
const CA_ADD_TEMPLATE: &str = "{preamble}{few_shot}Given a {item}: {text}\n{question} Please identify the {item} into one of the following types: {categories}. If you are unsure about your answer, please include other potential choices.";
const CA_ALL_TEMPLATE: &str = "{preamble}{few_shot}Given a {item}: {text}\n{question} Please identify the {item} with all possible choices of the following types: {categories}.";
const SELECT_TEMPLATE: &str = "{preamble}{few_shot}Given a {item}: {text}\n{question} It is known that the answer belongs to one of the following classes: {given}. Please select the correct answer from them.";

/// A template plus the task wording substituted into it.
///
/// Slots: `{preamble}`, `{few_shot}`, `{item}`, `{text}`, `{question}`,
/// `{categories}` and, for selection, `{given}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptStrategy {
    pub kind: PromptKind,
    pub template: String,
    /// Task description placed before everything else; may be empty.
    pub preamble: String,
    /// What a sample is called, e.g. "question" or "sentence".
    pub item: String,
    pub question: String,
}

impl PromptStrategy {
    pub fn new(kind: PromptKind) -> Self {
        let template = match kind {
            PromptKind::Sa => SA_TEMPLATE,
            PromptKind::CaAdd => CA_ADD_TEMPLATE,
            PromptKind::CaAll => CA_ALL_TEMPLATE,
            PromptKind::Select => SELECT_TEMPLATE,
        };
        Self {
            kind,
            template: template.to_string(),
            preamble: String::new(),
            item: "text".to_string(),
            question: "Which category does it belong to?".to_string(),
        }
    }

    pub fn with_task(mut self, item: &str, question: &str, preamble: &str) -> Self {
        self.item = item.to_string();
        self.question = question.to_string();
        self.preamble = preamble.to_string();
        self
    }
}

/// Substitutes `{name}` slots in one pass; inserted values are not rescanned.
fn render(template: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let Some(end) = after.find('}') else {
            return Err(Error::UnresolvedSlot(after.to_string()));
        };
        let name = &after[..end];
        out.push_str(&lookup(name).ok_or_else(|| Error::UnresolvedSlot(name.to_string()))?);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn few_shot_block(strategy: &PromptStrategy, examples: &[&PoolEntry], label_space: &LabelSpace) -> String {
    let mut block = String::new();
    for ex in examples {
        let answer = match strategy.kind {
            PromptKind::Sa | PromptKind::Select => label_space.name(ex.label.primary()).to_string(),
            PromptKind::CaAdd | PromptKind::CaAll => {
                render_labels(&ex.label.as_set(label_space.num_classes()), label_space)
            }
        };
        block.push_str(&format!("Given a {}: {}\nAnswer: {}\n\n", strategy.item, ex.text, answer));
    }
    block
}

/// Renders the prompt for one sample. `examples` are placed in the given order,
/// which [`crate::pool::retrieve_few_shot`] makes most-similar first.
pub fn build_prompt(
    sample_id: &str,
    text: Option<&str>,
    strategy: &PromptStrategy,
    label_space: &LabelSpace,
    examples: &[&PoolEntry],
    given: Option<&CandidateSet>,
) -> Result<String> {
    let text = text.ok_or_else(|| Error::MissingText(sample_id.to_string()))?;
    if strategy.kind == PromptKind::Select && given.is_none() {
        return Err(Error::MissingGivenSet("select", sample_id.to_string()));
    }
    let preamble = if strategy.preamble.is_empty() { String::new() } else { format!("{}\n\n", strategy.preamble) };
    let categories = label_space.names().join("; ");
    render(&strategy.template, |slot| match slot {
        "preamble" => Some(preamble.clone()),
        "few_shot" => Some(few_shot_block(strategy, examples, label_space)),
        "item" => Some(strategy.item.clone()),
        "text" => Some(text.to_string()),
        "question" => Some(strategy.question.clone()),
        "categories" => Some(categories.clone()),
        "given" => given.map(|g| render_labels(g, label_space)),
        _ => None,
    })
}

/// Question-type classification with six coarse classes.
pub mod trec {
    use candidate_distill::LabelSpace;

    use super::{PromptKind, PromptStrategy};

    pub const ABBR: usize = 0;
    pub const DESC: usize = 1;
    pub const ENTY: usize = 2;
    pub const HUM: usize = 3;
    pub const LOC: usize = 4;
    pub const NUM: usize = 5;

    pub const NAMES: [&str; 6] = [
        "Abbreviation",
        "Description and abstract concepts",
        "Entities",
        "Human beings",
        "Locations",
        "Numeric values",
    ];
    pub const CODES: [&str; 6] = ["ABBR", "DESC", "ENTY", "HUM", "LOC", "NUM"];

    const PREAMBLE: &str = "You classify questions by the type of answer they expect. \
        Answer briefly. \
        The coarse types are ABBR (abbreviations and their expansions), \
        DESC (definitions, descriptions, manners and reasons), \
        ENTY (animals, colors, products, substances and other entities), \
        HUM (people, groups and titles), \
        LOC (cities, countries, mountains and other places) and \
        NUM (dates, counts, distances, prices and other quantities).";

    pub fn label_space() -> LabelSpace {
        LabelSpace::new(NAMES.iter().map(|s| s.to_string()).collect()).expect("distinct names")
    }

    pub fn aliases() -> Vec<(String, usize)> {
        CODES.iter().enumerate().map(|(i, c)| (c.to_string(), i)).collect()
    }

    pub fn strategy(kind: PromptKind) -> PromptStrategy {
        PromptStrategy::new(kind).with_task("question", "What does the question ask about?", PREAMBLE)
    }
}
