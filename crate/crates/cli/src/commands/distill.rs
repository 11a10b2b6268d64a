use std::path::PathBuf;

use anyhow::{Context as _, Result};
use candidate_annotate::load_annotations;
use candidate_distill::refinery::{predict, train, AnyClassifier, ClassifierSpec, ModelFile, RefineryConfig};
use candidate_distill::{load_dataset, Dataset, Scalar};
use clap::{ArgAction, Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::{label_space, predictions_jsonl, Context, Precision};
use crate::output::Outputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Linear,
    Mlp,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    /// Dataset JSONL with features; inline candidates are used unless --annotations is given.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "trec")]
    labels: String,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long, value_enum)]
    classifier: Option<Arch>,
    /// Hidden width of the MLP.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, value_enum)]
    precision: Option<Precision>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    mixup_concentration: Option<f64>,
    #[arg(long)]
    eta_ramp_epochs: Option<usize>,
    /// Fixed consistency weight instead of the ramp.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, action = ArgAction::Set)]
    filter_out_of_candidate: Option<bool>,
    #[arg(long, action = ArgAction::Set)]
    jitter: Option<bool>,
    #[arg(long)]
    jitter_scale: Option<f64>,
    #[arg(long, default_value = "model.json")]
    model: PathBuf,
    #[arg(long, default_value = "history.csv")]
    history: PathBuf,
    #[arg(long, default_value = "predictions.jsonl")]
    predictions: PathBuf,
}

#[derive(Serialize)]
struct RefineryFlags {
    epochs: Option<usize>,
    warmup_epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    weight_decay: Option<f64>,
    delta: Option<f64>,
    gamma: Option<f64>,
    tau: Option<f64>,
    mixup_concentration: Option<f64>,
    eta_ramp_epochs: Option<usize>,
    eta: Option<f64>,
    filter_out_of_candidate: Option<bool>,
    jitter: Option<bool>,
    jitter_scale: Option<f64>,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelSettings {
    classifier: Arch,
    hidden: usize,
    precision: Precision,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self { classifier: Arch::Linear, hidden: 32, precision: Precision::F64 }
    }
}

#[derive(Serialize)]
struct ModelFlags {
    classifier: Option<Arch>,
    hidden: Option<usize>,
    precision: Option<Precision>,
}

#[derive(Serialize)]
struct Echo<'a> {
    model: &'a ModelSettings,
    refinery: &'a RefineryConfig,
}

pub fn run(ctx: &Context, args: DistillArgs) -> Result<()> {
    let flags = RefineryFlags {
        epochs: args.epochs,
        warmup_epochs: args.warmup_epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        weight_decay: args.weight_decay,
        delta: args.delta,
        gamma: args.gamma,
        tau: args.tau,
        mixup_concentration: args.mixup_concentration,
        eta_ramp_epochs: args.eta_ramp_epochs,
        eta: args.eta,
        filter_out_of_candidate: args.filter_out_of_candidate,
        jitter: args.jitter,
        jitter_scale: args.jitter_scale,
        seed: ctx.seed,
    };
    let config: RefineryConfig = ctx.file.layer(&RefineryConfig::default(), &flags)?;
    config.validate()?;
    let settings: ModelSettings = ctx.file.layer(
        &ModelSettings::default(),
        &ModelFlags { classifier: args.classifier, hidden: args.hidden, precision: args.precision },
    )?;

    let space = label_space(&args.labels)?;
    let mut out = Outputs::new("distill", ctx.seed);
    out.input(&args.data);
    let mut dataset =
        load_dataset(&args.data, space.clone()).with_context(|| format!("loading {}", args.data.display()))?;
    if let Some(path) = &args.annotations {
        out.input(path);
        dataset.set_candidates(load_annotations(path, space.num_classes())?)?;
    }
    let input_dim = dataset.feature_dim();
    let num_classes = space.num_classes();
    let spec = match settings.classifier {
        Arch::Linear => ClassifierSpec::Linear { input_dim, num_classes },
        Arch::Mlp => ClassifierSpec::Mlp { input_dim, hidden: settings.hidden, num_classes },
    };

    let fitted = match settings.precision {
        Precision::F64 => fit::<f64>(&dataset, spec, &config)?,
        Precision::F32 => fit::<f32>(&dataset, spec, &config)?,
    };
    out.add(ctx.out_path(&args.model), fitted.model);
    out.add(ctx.out_path(&args.history), fitted.history);
    out.add(ctx.out_path(&args.predictions), fitted.predictions);
    out.commit(&Echo { model: &settings, refinery: &config })?;

    match fitted.train_acc {
        Some(acc) => println!("trained {} epochs; final training accuracy {acc:.4}", config.epochs),
        None => println!("trained {} epochs", config.epochs),
    }
    Ok(())
}

struct Fitted {
    model: String,
    history: String,
    predictions: String,
    train_acc: Option<f64>,
}

fn fit<T: Scalar>(dataset: &Dataset, spec: ClassifierSpec, config: &RefineryConfig) -> Result<Fitted> {
    let init = AnyClassifier::<T>::init(spec, config.seed);
    let trained = train(dataset, init, config)?;
    let file = ModelFile::from_model(&trained.model, dataset.label_space().clone(), config.clone())?;
    let preds = predict(&trained.model, dataset)?;
    Ok(Fitted {
        model: file.to_json()?,
        history: trained.history.to_csv(),
        predictions: predictions_jsonl(dataset, &preds)?,
        train_acc: trained.history.final_train_acc(),
    })
}
