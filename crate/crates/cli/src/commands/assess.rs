use std::collections::HashMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use candidate_annotate::load_annotations;
use candidate_distill::metrics::{assess, AssessmentReport};
use candidate_distill::{load_dataset, CandidateSet};
use clap::Args;
use serde::Deserialize;

use super::{label_space, Context};
use crate::output::Outputs;

#[derive(Debug, Args)]
pub struct AssessArgs {
    /// Dataset JSONL with gold labels; its inline candidates are used when no other source is given.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "trec")]
    labels: String,
    #[arg(long, conflicts_with = "predictions")]
    annotations: Option<PathBuf>,
    /// Predictions JSONL from `distill` or `predict`, scored as singleton sets.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Value of the `dataset` column.
    #[arg(long)]
    dataset_name: Option<String>,
    /// Value of the `strategy` column.
    #[arg(long)]
    strategy: Option<String>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct PredictionLine {
    id: String,
    label: usize,
}

fn load_predictions(path: &Path, num_classes: usize) -> Result<HashMap<String, CandidateSet>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut map = HashMap::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PredictionLine = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        map.insert(p.id, CandidateSet::singleton(p.label, num_classes)?);
    }
    Ok(map)
}

pub fn run(ctx: &Context, args: AssessArgs) -> Result<()> {
    let space = label_space(&args.labels)?;
    let c = space.num_classes();
    let mut out = Outputs::new("assess", ctx.seed);
    out.input(&args.data);
    let mut dataset = load_dataset(&args.data, space).with_context(|| format!("loading {}", args.data.display()))?;
    let (source, strategy_default) = if let Some(path) = &args.annotations {
        out.input(path);
        (Some(load_annotations(path, c)?), "annotations")
    } else if let Some(path) = &args.predictions {
        out.input(path);
        (Some(load_predictions(path, c)?), "predictions")
    } else {
        (None, "inline")
    };
    if let Some(map) = source {
        dataset.set_candidates(map)?;
    }

    let mut sets = Vec::new();
    let mut gold = Vec::new();
    let mut missing = 0;
    for (sample, set) in dataset.samples().iter().zip(dataset.candidates()) {
        let Some(g) = sample.gold else { bail!("sample {} has no gold label", sample.id) };
        match set {
            Some(s) => {
                sets.push(s.clone());
                gold.push(g);
            }
            None => missing += 1,
        }
    }
    if missing > 0 {
        log::warn!("{missing} samples have no candidate set and are not scored");
    }
    if sets.is_empty() {
        bail!("no sample has both a gold label and a candidate set");
    }
    let report = assess(&sets, &gold, c)?;
    let name = args
        .dataset_name
        .clone()
        .unwrap_or_else(|| args.data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let strategy = args.strategy.as_deref().unwrap_or(strategy_default);
    let text = format!("{}\n{}\n", AssessmentReport::CSV_HEADER, report.csv_row(&name, strategy));
    print!("{text}");
    if let Some(path) = &args.out {
        out.add(ctx.out_path(path), text);
        out.commit(&report)?;
    }
    Ok(())
}
