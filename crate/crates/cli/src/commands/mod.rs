use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use candidate_annotate::trec;
use candidate_distill::LabelSpace;

use crate::config::FileConfig;

pub mod annotate;
pub mod assess;
pub mod distill;
pub mod predict;
pub mod synth;
pub mod theory;

pub use annotate::AnnotateArgs;
pub use assess::AssessArgs;
pub use distill::DistillArgs;
pub use predict::PredictArgs;
pub use synth::SynthArgs;
pub use theory::TheoryCommand;

/// Every key any subcommand reads from the config file.
const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out_dir",
    "num_classes",
    "per_class",
    "dim",
    "sep",
    "inclusion",
    "mean_size",
    "strategy",
    "sc_mode",
    "few_shot",
    "pool_size",
    "endpoint",
    "model",
    "temperature",
    "n_samples",
    "max_concurrency",
    "timeout_secs",
    "retry",
    "retry_backoff_ms",
    "api_key_env",
    "epochs",
    "warmup_epochs",
    "batch_size",
    "learning_rate",
    "weight_decay",
    "delta",
    "gamma",
    "tau",
    "mixup_concentration",
    "eta_ramp_epochs",
    "eta",
    "filter_out_of_candidate",
    "jitter",
    "jitter_scale",
    "classifier",
    "hidden",
    "precision",
    "num_samples",
    "intra",
    "inter",
    "lambda",
    "rho",
];

pub struct Context {
    pub file: FileConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: Option<&Path>, seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<Self> {
        let file = FileConfig::load(config)?;
        for key in file.keys() {
            if !KNOWN_KEYS.contains(&key) {
                log::warn!("unknown config key `{key}` ignored");
            }
        }
        let seed = match seed {
            Some(s) => s,
            None => file.get("seed")?.unwrap_or(0),
        };
        let out_dir = match out_dir {
            Some(d) => d,
            None => file.get::<PathBuf>("out_dir")?.unwrap_or_else(|| PathBuf::from(".")),
        };
        Ok(Self { file, seed, out_dir })
    }

    pub fn out_path(&self, name: &Path) -> PathBuf {
        if name.is_absolute() {
            name.to_path_buf()
        } else {
            self.out_dir.join(name)
        }
    }
}

/// `trec`, a class count, or a JSON file holding either a list of names or
/// `{"names": [...], "descriptions": [...]}`.
pub fn label_space(spec: &str) -> Result<LabelSpace> {
    if spec.eq_ignore_ascii_case("trec") {
        return Ok(trec::label_space());
    }
    if let Ok(c) = spec.parse::<usize>() {
        return Ok(LabelSpace::numbered(c)?);
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading label space {spec}"))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {spec}"))?;
    let space: LabelSpace = if value.is_array() {
        LabelSpace::new(serde_json::from_value(value)?)?
    } else {
        serde_json::from_value(value)?
    };
    space.validate()?;
    Ok(space)
}

/// A failure of the run itself rather than of its inputs.
#[derive(Debug)]
pub struct RuntimeFailure(pub String);

impl fmt::Display for RuntimeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for RuntimeFailure {}

/// 2 for runtime failures, 1 for everything attributable to inputs.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    use candidate_annotate::Error as A;
    use candidate_distill::Error as D;
    for cause in e.chain() {
        if cause.is::<RuntimeFailure>() {
            return 2;
        }
        if let Some(d) = cause.downcast_ref::<D>() {
            if matches!(d, D::Diverged { .. } | D::NotConverged { .. } | D::NotPositiveDefinite) {
                return 2;
            }
        }
        if let Some(a) = cause.downcast_ref::<A>() {
            if matches!(a, A::Request(_) | A::BadResponse(_)) {
                return 2;
            }
        }
    }
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(serde::Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    label: usize,
    probs: Vec<f64>,
}

/// One `{"id", "label", "probs"}` line per sample.
pub fn predictions_jsonl<T: candidate_distill::Scalar>(
    dataset: &candidate_distill::Dataset,
    preds: &candidate_distill::refinery::Predictions<T>,
) -> Result<String> {
    let mut out = String::new();
    for ((sample, &label), probs) in dataset.samples().iter().zip(&preds.labels).zip(&preds.probs) {
        out.push_str(&serde_json::to_string(&PredictionLine { id: &sample.id, label, probs: probs.to_f64() })?);
        out.push('\n');
    }
    Ok(out)
}
