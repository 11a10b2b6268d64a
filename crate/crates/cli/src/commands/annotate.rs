use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use anyhow::{Context as _, Result};
use candidate_annotate::{
    load_annotations, trec, Annotator, ChatClient, ExamplePool, HttpClient, LabelMatcher, LlmClientConfig, PromptKind,
    PromptStrategy, ReplayClient, ReplayEntry, ReplayLog, ScMode, DEFAULT_POOL_SIZE,
};
use candidate_distill::load_dataset;
use clap::Args;
use serde::{Deserialize, Serialize};

use super::{label_space, Context, RuntimeFailure};
use crate::output::Outputs;

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Dataset JSONL; every sample needs `text`.
    #[arg(long)]
    data: PathBuf,
    /// `trec`, a class count, or a JSON label-space file.
    #[arg(long, default_value = "trec")]
    labels: String,
    /// sa, ca_add, ca_all or select.
    #[arg(long)]
    strategy: Option<String>,
    /// Answer from a replay log instead of calling the endpoint.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Annotation file whose sets are shown to the `select` strategy.
    #[arg(long)]
    given: Option<PathBuf>,
    /// Few-shot example pool (JSONL with `id`, `text`, `label`, `embedding`).
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long)]
    few_shot: Option<usize>,
    /// Completions per sample; above 1 the answers are aggregated.
    #[arg(long, visible_alias = "n-samples")]
    sc_samples: Option<usize>,
    /// `all` or `topK` for aggregating several answers.
    #[arg(long)]
    sc_mode: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_concurrency: Option<usize>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    retry: Option<usize>,
    #[arg(long)]
    retry_backoff_ms: Option<u64>,
    /// Name of the environment variable holding the API token.
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long, default_value = "annotations.jsonl")]
    out: PathBuf,
    /// Prompts and raw responses of this run, replayable with --replay.
    #[arg(long, default_value = "replay.log")]
    log: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct Settings {
    strategy: String,
    sc_mode: String,
    few_shot: usize,
    pool_size: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self { strategy: "ca_all".into(), sc_mode: "all".into(), few_shot: 10, pool_size: DEFAULT_POOL_SIZE }
    }
}

#[derive(Serialize)]
struct SettingsFlags<'a> {
    strategy: Option<&'a str>,
    sc_mode: Option<&'a str>,
    few_shot: Option<usize>,
    pool_size: Option<usize>,
}

#[derive(Serialize)]
struct ClientFlags<'a> {
    endpoint: Option<&'a str>,
    model: Option<&'a str>,
    temperature: Option<f64>,
    n_samples: Option<usize>,
    max_concurrency: Option<usize>,
    timeout_secs: Option<u64>,
    retry: Option<usize>,
    retry_backoff_ms: Option<u64>,
    api_key_env: Option<&'a str>,
}

#[derive(Serialize)]
struct Echo<'a> {
    settings: &'a Settings,
    client: &'a LlmClientConfig,
    replay: bool,
}

/// In-memory sink so the log can be reordered and written atomically.
#[derive(Clone, Default)]
struct SharedBuf(Arc<Mutex<Vec<u8>>>);

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().expect("log buffer poisoned").extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

pub fn run(ctx: &Context, args: AnnotateArgs) -> Result<()> {
    let settings: Settings = ctx.file.layer(
        &Settings::default(),
        &SettingsFlags {
            strategy: args.strategy.as_deref(),
            sc_mode: args.sc_mode.as_deref(),
            few_shot: args.few_shot,
            pool_size: args.pool_size,
        },
    )?;
    let client_cfg: LlmClientConfig = ctx.file.layer(
        &LlmClientConfig::default(),
        &ClientFlags {
            endpoint: args.endpoint.as_deref(),
            model: args.model.as_deref(),
            temperature: args.temperature,
            n_samples: args.sc_samples,
            max_concurrency: args.max_concurrency,
            timeout_secs: args.timeout_secs,
            retry: args.retry,
            retry_backoff_ms: args.retry_backoff_ms,
            api_key_env: args.api_key_env.as_deref(),
        },
    )?;
    client_cfg.validate()?;
    let kind: PromptKind = settings.strategy.parse()?;
    let sc_mode: ScMode = settings.sc_mode.parse()?;

    let is_trec = args.labels.eq_ignore_ascii_case("trec");
    let space = label_space(&args.labels)?;
    let mut out = Outputs::new("annotate", ctx.seed);
    out.input(&args.data);
    let mut dataset =
        load_dataset(&args.data, space.clone()).with_context(|| format!("loading {}", args.data.display()))?;
    if let Some(given) = &args.given {
        out.input(given);
        dataset.set_candidates(load_annotations(given, space.num_classes())?)?;
    }
    let (strategy, matcher) = if is_trec {
        (trec::strategy(kind), LabelMatcher::with_aliases(&space, &trec::aliases())?)
    } else {
        (PromptStrategy::new(kind), LabelMatcher::new(&space))
    };
    let pool = match &args.pool {
        Some(path) => {
            out.input(path);
            Some(
                ExamplePool::load(path, &space, settings.pool_size)
                    .with_context(|| format!("loading pool {}", path.display()))?,
            )
        }
        None => None,
    };
    let client: Box<dyn ChatClient> = match &args.replay {
        Some(path) => {
            out.input(path);
            Box::new(ReplayClient::load(path).with_context(|| format!("loading replay {}", path.display()))?)
        }
        None => Box::new(HttpClient::from_env(&client_cfg)?),
    };

    let buf = SharedBuf::default();
    let log = ReplayLog::new(buf.clone());
    let mut annotator = Annotator::new(&strategy, client.as_ref(), &matcher, &client_cfg);
    annotator.pool = pool.as_ref();
    annotator.few_shot = settings.few_shot;
    annotator.sc_mode = sc_mode;
    annotator.log = Some(&log);
    let result = annotator.run(&dataset)?;
    drop(log);

    let log_text = reorder_log(&buf, &dataset)?;
    let mut text = Vec::new();
    result.write_to(&mut text)?;
    out.add(ctx.out_path(&args.out), text);
    out.add(ctx.out_path(&args.log), log_text);
    out.commit(&Echo { settings: &settings, client: &client_cfg, replay: args.replay.is_some() })?;

    println!("annotated {} of {} samples with {kind}", result.records.len(), dataset.len());
    if !result.errors.is_empty() {
        for e in &result.errors {
            eprintln!("  {}: {}", e.sample_id, e.error);
        }
        return Err(RuntimeFailure(format!("{} samples failed", result.errors.len())).into());
    }
    Ok(())
}

/// Log lines in dataset order, so concurrent runs write identical logs.
fn reorder_log(buf: &SharedBuf, dataset: &candidate_distill::Dataset) -> Result<String> {
    let raw = String::from_utf8(std::mem::take(&mut *buf.0.lock().expect("log buffer poisoned")))?;
    let mut entries: Vec<(usize, &str)> = Vec::new();
    for line in raw.lines() {
        let entry: ReplayEntry = serde_json::from_str(line)?;
        entries.push((dataset.index_of(&entry.sample_id).unwrap_or(usize::MAX), line));
    }
    entries.sort_by_key(|&(i, _)| i);
    Ok(entries.iter().map(|(_, l)| format!("{l}\n")).collect())
}
