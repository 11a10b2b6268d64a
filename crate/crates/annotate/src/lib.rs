//! Eliciting candidate-set annotations from a chat-completion model.

pub mod aggregate;
pub mod client;
pub mod error;
pub mod parse;
pub mod pool;
pub mod prompt;
pub mod run;

pub use aggregate::{majority_vote, sc_aggregate, ScMode};
pub use client::{
    ChatClient, ChatRequest, HttpClient, LlmClientConfig, ReplayClient, ReplayEntry, ReplayLog, ScriptedClient,
};
pub use error::{Error, Result};
pub use parse::{parse_candidates, parse_single, render_labels, LabelMatcher};
pub use pool::{retrieve_few_shot, ExamplePool, PoolEntry, PoolLabel, DEFAULT_POOL_SIZE};
pub use prompt::{build_prompt, trec, PromptKind, PromptStrategy};
pub use run::{
    load_annotations, read_annotations, AnnotationLine, AnnotationRecord, AnnotationRun, Annotator, SampleError,
};
