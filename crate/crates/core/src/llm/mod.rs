//! Communication Coach and Reframer stages: prompt construction, a minimal
//! chat-completion contract, strict structured-output parsing, and the retry
//! loop that ties them together.

mod http;
mod parse;
mod prompt;
mod reframe;
pub mod sections;

use std::borrow::Cow;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{CategoryLabel, LabelSet, TaxonomyError, TextSample};

pub use http::{ChatRequestBody, HttpChatClient, HttpClientConfig};
pub use parse::{
    parse_coach_response, parse_reframe_response, render_coach_xml, render_reframe_text,
};
pub use prompt::{
    build_coach_prompt, CoachExample, PromptConfig, PromptStage, Section, DEFAULT_COACH_PROMPT,
};
pub use reframe::{
    build_reframe_prompt, build_reframe_prompt_with, ReframeConfig, ReframeExample,
    DEFAULT_REFRAME_PROMPT,
};

/// Appended to the original prompt when a reply could not be parsed.
pub const RETRY_SUFFIX: &str = "Your previous reply was not in the required format. \
Answer again, following the output format instructions above exactly and adding nothing else.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub retries: u32,
    pub timeout_ms: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { temperature: 0.0, max_output_tokens: 256, retries: 2, timeout_ms: 30_000 }
    }
}

impl GenParams {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ClientError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("endpoint returned status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("unexpected response body: {0}")]
    InvalidResponse(String),
}

/// One chat completion: prompt in, completion text out.
pub trait ChatClient: Send + Sync {
    fn complete(&self, prompt: &str, params: &GenParams) -> Result<String, ClientError>;

    fn model_name(&self) -> &str {
        "unknown"
    }
}

impl<C: ChatClient + ?Sized> ChatClient for std::sync::Arc<C> {
    fn complete(&self, prompt: &str, params: &GenParams) -> Result<String, ClientError> {
        (**self).complete(prompt, params)
    }

    fn model_name(&self) -> &str {
        (**self).model_name()
    }
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn complete(&self, prompt: &str, params: &GenParams) -> Result<String, ClientError> {
        (**self).complete(prompt, params)
    }

    fn model_name(&self) -> &str {
        (**self).model_name()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("empty input text")]
    EmptyInput,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("unknown label: {0:?}")]
    UnknownLabel(String),
    #[error("Non-Toxic mixed with toxic labels: {0:?}")]
    ConflictingLabels(Vec<CategoryLabel>),
    #[error("no definition configured for {0}")]
    MissingDefinition(CategoryLabel),
    #[error("prompt configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("gave up after {attempts} attempts: {last}")]
    ExhaustedRetries { attempts: u32, last: Box<LlmError> },
}

impl From<TaxonomyError> for LlmError {
    fn from(e: TaxonomyError) -> Self {
        match e {
            TaxonomyError::UnknownLabel(raw) => LlmError::UnknownLabel(raw),
            TaxonomyError::ConflictingLabels(l) => LlmError::ConflictingLabels(l),
            TaxonomyError::EmptyLabelSet => LlmError::MalformedResponse("empty <category>".into()),
            other => LlmError::MalformedResponse(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub labels: LabelSet,
    pub rationale: String,
    pub raw_response: String,
    /// Re-prompts needed before the reply parsed.
    #[serde(default)]
    pub retry_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetoxResult {
    pub detoxified: String,
    pub rationale: String,
    pub raw_response: String,
    #[serde(default)]
    pub retry_count: u32,
}

fn complete_with_retries<T>(
    client: &dyn ChatClient,
    prompt: &str,
    gen: &GenParams,
    parse: impl Fn(&str) -> Result<T, LlmError>,
) -> Result<(T, u32), LlmError> {
    let mut last = None;
    for attempt in 0..=gen.retries {
        let text: Cow<'_, str> = if attempt == 0 {
            Cow::Borrowed(prompt)
        } else {
            Cow::Owned(format!("{prompt}\n\n{RETRY_SUFFIX}"))
        };
        let raw = client.complete(&text, gen)?;
        match parse(&raw) {
            Ok(v) => return Ok((v, attempt)),
            Err(e) => {
                tracing::debug!(attempt, error = %e, "unparseable completion");
                last = Some(e);
            }
        }
    }
    Err(LlmError::ExhaustedRetries {
        attempts: gen.retries + 1,
        last: Box::new(last.expect("at least one attempt runs")),
    })
}

/// Coach stage: prompt, complete, parse, re-prompting on unparseable replies.
pub fn classify_subcategories(
    sample: &TextSample,
    client: &dyn ChatClient,
    cfg: &PromptConfig,
    gen: &GenParams,
) -> Result<ClassificationResult, LlmError> {
    let prompt = build_coach_prompt(sample, cfg)?;
    let (mut result, retries) = complete_with_retries(client, &prompt, gen, parse_coach_response)?;
    result.retry_count = retries;
    Ok(result)
}

/// Reframer stage with the bundled reframe prompt.
pub fn detoxify(
    sample: &TextSample,
    client: &dyn ChatClient,
    gen: &GenParams,
) -> Result<DetoxResult, LlmError> {
    detoxify_with(sample, client, &ReframeConfig::default(), gen)
}

pub fn detoxify_with(
    sample: &TextSample,
    client: &dyn ChatClient,
    cfg: &ReframeConfig,
    gen: &GenParams,
) -> Result<DetoxResult, LlmError> {
    sample.ensure_non_empty().map_err(|_| LlmError::EmptyInput)?;
    let prompt = build_reframe_prompt_with(sample, cfg);
    let (mut result, retries) =
        complete_with_retries(client, &prompt, gen, parse_reframe_response)?;
    result.retry_count = retries;
    Ok(result)
}
