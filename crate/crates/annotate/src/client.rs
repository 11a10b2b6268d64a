//! Chat-completion clients: live HTTP, replay from a log, and scripted.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const ANNOTATION_TEMPERATURE: f64 = 0.3;
pub const SELF_CONSISTENCY_TEMPERATURE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    pub endpoint: String,
    pub model: String,
    /// Defaults to 0.3 for one response, 0.5 when sampling several.
    pub temperature: Option<f64>,
    pub n_samples: usize,
    pub max_concurrency: usize,
    pub timeout_secs: u64,
    pub retry: usize,
    pub retry_backoff_ms: u64,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo-0125".into(),
            temperature: None,
            n_samples: 1,
            max_concurrency: 4,
            timeout_secs: 60,
            retry: 3,
            retry_backoff_ms: 500,
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

impl LlmClientConfig {
    pub fn effective_temperature(&self) -> f64 {
        self.temperature.unwrap_or(if self.n_samples > 1 {
            SELF_CONSISTENCY_TEMPERATURE
        } else {
            ANNOTATION_TEMPERATURE
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.max_concurrency == 0 {
            return Err(Error::Config("n_samples and max_concurrency must be positive".into()));
        }
        if let Some(t) = self.temperature {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("temperature {t} must be nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub sample_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub n: usize,
}

pub trait ChatClient: Send + Sync {
    /// Up to `request.n` completions for one prompt.
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>>;
}

/// OpenAI-style `/chat/completions` over HTTP with a bearer token.
pub struct HttpClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: String,
}

impl HttpClient {
    /// Reads the token from the environment variable named in `config`.
    pub fn from_env(config: &LlmClientConfig) -> Result<Self> {
        let api_key =
            std::env::var(&config.api_key_env).map_err(|_| Error::MissingApiKey(config.api_key_env.clone()))?;
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(config.timeout_secs))).build().into();
        Ok(Self { agent, endpoint: config.endpoint.clone(), model: config.model.clone(), api_key })
    }

    fn call(&self, prompt: &str, temperature: f64, n: usize) -> Result<Vec<String>> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "n": n,
        });
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::StatusCode(code) if code == 429 || code >= 500 => Error::Request(format!("HTTP {code}")),
                ureq::Error::StatusCode(code) => Error::BadResponse(format!("HTTP {code}")),
                other => Error::Request(other.to_string()),
            })?;
        let value: Value = response.body_mut().read_json().map_err(|e| Error::BadResponse(e.to_string()))?;
        parse_completion(&value)
    }
}

/// Message contents of every choice in a completion response.
pub fn parse_completion(value: &Value) -> Result<Vec<String>> {
    let choices =
        value.get("choices").and_then(Value::as_array).ok_or_else(|| Error::BadResponse("missing `choices`".into()))?;
    choices
        .iter()
        .map(|c| {
            c.pointer("/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| Error::BadResponse("choice without message content".into()))
        })
        .collect()
}

impl ChatClient for HttpClient {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>> {
        let mut out = self.call(&request.prompt, request.temperature, request.n)?;
        // Some servers ignore `n`; top up one call at a time.
        let mut extra_calls = 0;
        while out.len() < request.n && extra_calls < request.n {
            out.extend(self.call(&request.prompt, request.temperature, 1)?);
            extra_calls += 1;
        }
        out.truncate(request.n);
        Ok(out)
    }
}

/// One logged call; the log doubles as a replay fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub sample_id: String,
    pub prompt: String,
    pub responses: Vec<String>,
}

/// Serves responses recorded in a replay log, keyed by sample id.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    entries: HashMap<String, ReplayEntry>,
}

impl ReplayClient {
    pub fn new(entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        Self { entries: entries.into_iter().map(|e| (e.sample_id.clone(), e)).collect() }
    }

    /// Later lines for the same sample replace earlier ones.
    pub fn read_from(reader: impl BufRead) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str::<ReplayEntry>(&line)
                    .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?,
            );
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ChatClient for ReplayClient {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>> {
        let entry = self.entries.get(&request.sample_id).ok_or_else(|| Error::ReplayMiss(request.sample_id.clone()))?;
        if entry.prompt != request.prompt {
            log::warn!("replayed prompt for {:?} differs from the rendered prompt", request.sample_id);
        }
        if entry.responses.len() < request.n {
            log::warn!("replay for {:?} has {} of {} responses", request.sample_id, entry.responses.len(), request.n);
        }
        Ok(entry.responses.iter().take(request.n).cloned().collect())
    }
}

type Script = dyn Fn(&ChatRequest) -> Result<Vec<String>> + Send + Sync;

/// Responses computed by a closure; for tests and dry runs.
pub struct ScriptedClient {
    script: Box<Script>,
}

impl ScriptedClient {
    pub fn new(script: impl Fn(&ChatRequest) -> Result<Vec<String>> + Send + Sync + 'static) -> Self {
        Self { script: Box::new(script) }
    }

    /// Always answers `text`.
    pub fn constant(text: &str) -> Self {
        let text = text.to_string();
        Self::new(move |r| Ok(vec![text.clone(); r.n]))
    }

    /// Draws each response from weighted `choices`, seeded by `seed` and the
    /// sample id so runs are reproducible in any request order.
    pub fn multinomial(choices: Vec<(String, f64)>, seed: u64) -> Self {
        Self::new(move |r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(r.sample_id.as_bytes()));
            (0..r.n)
                .map(|_| {
                    choices
                        .choose_weighted(&mut rng, |c| c.1)
                        .map(|c| c.0.clone())
                        .map_err(|e| Error::Config(format!("bad choice weights: {e}")))
                })
                .collect()
        })
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>> {
        (self.script)(request)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Append-only replay log shared between worker threads.
pub struct ReplayLog {
    sink: Mutex<Box<dyn Write + Send>>,
}

impl ReplayLog {
    pub fn new(sink: impl Write + Send + 'static) -> Self {
        Self { sink: Mutex::new(Box::new(sink)) }
    }

    pub fn append(&self, entry: &ReplayEntry) -> Result<()> {
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        let mut sink = self.sink.lock().expect("replay log poisoned");
        sink.write_all(line.as_bytes())?;
        sink.flush()?;
        Ok(())
    }
}
