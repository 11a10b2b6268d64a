use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use candidate_distill::load_dataset;
use candidate_distill::refinery::{predict, ModelFile};
use clap::Args;

use super::{predictions_jsonl, Context, Precision};
use crate::output::Outputs;

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by `distill`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    #[arg(long, default_value = "predictions.jsonl")]
    out: PathBuf,
}

pub fn run(ctx: &Context, args: PredictArgs) -> Result<()> {
    let file = ModelFile::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let dataset = load_dataset(&args.data, file.label_space.clone())
        .with_context(|| format!("loading {}", args.data.display()))?;
    if !dataset.is_empty() && dataset.feature_dim() != file.feature_dim {
        bail!("dataset has {} features, model expects {}", dataset.feature_dim(), file.feature_dim);
    }
    let text = match args.precision {
        Precision::F64 => predictions_jsonl(&dataset, &predict(&file.to_model::<f64>()?, &dataset)?)?,
        Precision::F32 => predictions_jsonl(&dataset, &predict(&file.to_model::<f32>()?, &dataset)?)?,
    };
    let mut out = Outputs::new("predict", ctx.seed);
    out.input(&args.model);
    out.input(&args.data);
    out.add(ctx.out_path(&args.out), text);
    out.commit(&serde_json::json!({ "precision": args.precision }))?;
    println!("labelled {} samples", dataset.len());
    Ok(())
}
