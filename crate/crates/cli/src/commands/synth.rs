use std::path::PathBuf;

use anyhow::Result;
use candidate_distill::synth::{gen_synthetic, NoiseSpec, SynthConfig};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::Context;
use crate::output::Outputs;

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Distance between any two class means.
    #[arg(long)]
    sep: Option<f64>,
    /// Probability that a candidate set contains the gold label.
    #[arg(long)]
    inclusion: Option<f64>,
    #[arg(long)]
    mean_size: Option<f64>,
    #[arg(long, default_value = "synth.jsonl")]
    out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct Settings {
    num_classes: usize,
    per_class: usize,
    dim: usize,
    sep: f64,
    inclusion: f64,
    mean_size: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { num_classes: 4, per_class: 100, dim: 8, sep: 3.0, inclusion: 0.9, mean_size: 1.5 }
    }
}

#[derive(Serialize)]
struct Flags {
    num_classes: Option<usize>,
    per_class: Option<usize>,
    dim: Option<usize>,
    sep: Option<f64>,
    inclusion: Option<f64>,
    mean_size: Option<f64>,
}

pub fn run(ctx: &Context, args: SynthArgs) -> Result<()> {
    let flags = Flags {
        num_classes: args.num_classes,
        per_class: args.per_class,
        dim: args.dim,
        sep: args.sep,
        inclusion: args.inclusion,
        mean_size: args.mean_size,
    };
    let s: Settings = ctx.file.layer(&Settings::default(), &flags)?;
    let cfg = SynthConfig {
        num_classes: s.num_classes,
        per_class: s.per_class,
        dim: s.dim,
        sep: s.sep,
        noise: NoiseSpec { inclusion: s.inclusion, mean_size: s.mean_size },
        seed: ctx.seed,
    };
    let dataset = gen_synthetic(&cfg)?;

    let data_path = ctx.out_path(&args.out);
    let labels_path = data_path.with_extension("labels.json");
    let mut labels = serde_json::to_string_pretty(dataset.label_space())?;
    labels.push('\n');

    let mut out = Outputs::new("synth", ctx.seed);
    out.add(data_path.clone(), dataset.to_jsonl());
    out.add(labels_path.clone(), labels);
    out.commit(&cfg)?;
    println!("wrote {} samples to {} (labels: {})", dataset.len(), data_path.display(), labels_path.display());
    Ok(())
}
