use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatClient, ClientError, GenParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpClientConfig {
    /// Full chat-completions URL, e.g. `http://localhost:8080/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    #[serde(skip_serializing, default)]
    pub api_key: Option<String>,
}

impl HttpClientConfig {
    /// Reads `LLM_ENDPOINT`, `LLM_MODEL` and `LLM_API_KEY`.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var("LLM_ENDPOINT").ok().filter(|s| !s.is_empty())?;
        Some(Self {
            endpoint,
            model: std::env::var("LLM_MODEL").unwrap_or_else(|_| "default".into()),
            api_key: std::env::var("LLM_API_KEY").ok().filter(|s| !s.is_empty()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequestBody {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequestBody {
    pub fn new(model: &str, prompt: &str, params: &GenParams) -> Self {
        Self {
            model: model.to_string(),
            messages: vec![ChatMessage { role: "user".into(), content: prompt.to_string() }],
            temperature: params.temperature,
            max_tokens: params.max_output_tokens,
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

/// Blocking client for OpenAI-style chat-completions endpoints.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    cfg: HttpClientConfig,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(cfg: HttpClientConfig) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .connect_timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self { cfg, http })
    }

    pub fn config(&self) -> &HttpClientConfig {
        &self.cfg
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, prompt: &str, params: &GenParams) -> Result<String, ClientError> {
        let mut req = self
            .http
            .post(&self.cfg.endpoint)
            .timeout(params.timeout())
            .json(&ChatRequestBody::new(&self.cfg.model, prompt, params));
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(map_reqwest)?;
        let status = resp.status();
        let body = resp.text().map_err(map_reqwest)?;
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(ClientError::Auth(format!("status {}", status.as_u16())));
        }
        if !status.is_success() {
            let mut body = body;
            body.truncate(512);
            return Err(ClientError::Status { code: status.as_u16(), body });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&body).map_err(|e| ClientError::InvalidResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ClientError::InvalidResponse("no choices[0].message.content".into()))
    }

    fn model_name(&self) -> &str {
        &self.cfg.model
    }
}

fn map_reqwest(e: reqwest::Error) -> ClientError {
    if e.is_timeout() {
        ClientError::Timeout
    } else {
        ClientError::Transport(e.to_string())
    }
}
