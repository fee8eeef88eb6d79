//! Service configuration: a TOML file, then `TOXISHIELD_<SECTION>_<KEY>`
//! environment overrides, then the `LLM_*` variables. Secrets are read from
//! the environment only.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toxishield_core::filter::{BackendKind, DEFAULT_THRESHOLD};
use toxishield_core::llm::{GenParams, PromptStage};
use toxishield_core::tokenizer::DEFAULT_MAX_LEN;

pub const ENV_PREFIX: &str = "TOXISHIELD_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    /// Origins allowed by CORS, e.g. the extension origin.
    pub cors_allow: Vec<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8088".into(), cors_allow: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub backend: BackendKind,
    pub model_path: Option<PathBuf>,
    pub vocab_path: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
    pub anger_path: Option<PathBuf>,
    pub threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Lexicon,
            model_path: None,
            vocab_path: None,
            lexicon_path: None,
            anger_path: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub max_len: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self { max_len: DEFAULT_MAX_LEN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: Option<String>,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    #[serde(flatten)]
    pub gen: GenParams,
    /// Global bound on in-flight chat calls.
    pub max_concurrent: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: "default".into(),
            api_key_env: "LLM_API_KEY".into(),
            gen: GenParams::default(),
            max_concurrent: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptFiles {
    pub stage: PromptStage,
    pub coach_path: Option<PathBuf>,
    pub reframe_path: Option<PathBuf>,
}

impl Default for PromptFiles {
    fn default() -> Self {
        Self { stage: PromptStage::S4, coach_path: None, reframe_path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Run Coach and Reframer at the same time; `false` runs them in sequence.
    pub concurrent: bool,
    pub coach_timeout_ms: u64,
    pub reframer_timeout_ms: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { concurrent: true, coach_timeout_ms: 60_000, reframer_timeout_ms: 60_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub server: ServerConfig,
    pub filter: FilterConfig,
    pub tokenizer: TokenizerConfig,
    pub llm: LlmConfig,
    pub prompt: PromptFiles,
    pub pipeline: PipelineConfig,
}

impl ServiceConfig {
    /// File (if any) plus overrides from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.into(), source })?,
            None => String::new(),
        };
        Self::from_sources(&text, std::env::vars())
    }

    pub fn from_sources(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        reject_secrets(&doc)?;
        let mut llm_env = Vec::new();
        for (key, value) in env {
            if let Some(rest) = key.strip_prefix(ENV_PREFIX) {
                apply_override(&mut doc, rest, &value)?;
            } else if matches!(key.as_str(), "LLM_ENDPOINT" | "LLM_MODEL") {
                llm_env.push((key, value));
            }
        }
        for (key, value) in llm_env {
            let field = if key == "LLM_ENDPOINT" { "endpoint" } else { "model" };
            section(&mut doc, "llm")?.insert(field.into(), toml::Value::String(value));
        }
        let cfg: Self = doc.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(0.0..=1.0).contains(&self.filter.threshold) {
            return bad(format!("filter.threshold {} outside [0, 1]", self.filter.threshold));
        }
        if self.tokenizer.max_len < 3 {
            return bad(format!("tokenizer.max_len {} must be at least 3", self.tokenizer.max_len));
        }
        if self.filter.backend == BackendKind::SerializedModel
            && (self.filter.model_path.is_none() || self.filter.vocab_path.is_none())
        {
            return bad("serialized_model backend needs filter.model_path and filter.vocab_path".into());
        }
        if self.server.bind.parse::<SocketAddr>().is_err() {
            return bad(format!("server.bind {:?} is not host:port", self.server.bind));
        }
        if self.llm.max_concurrent == 0 {
            return bad("llm.max_concurrent must be positive".into());
        }
        if self.llm.gen.temperature < 0.0 {
            return bad("llm.temperature must be non-negative".into());
        }
        Ok(())
    }

    pub fn api_key(&self) -> Option<String> {
        std::env::var(&self.llm.api_key_env).ok().filter(|k| !k.is_empty())
    }
}

fn reject_secrets(doc: &toml::Table) -> Result<(), ConfigError> {
    for (name, value) in doc {
        if let toml::Value::Table(t) = value {
            if let Some(k) = t.keys().find(|k| matches!(k.as_str(), "api_key" | "key" | "token" | "secret")) {
                return Err(ConfigError::Invalid(format!(
                    "[{name}] {k}: secrets are read from the environment, not the config file"
                )));
            }
        }
    }
    Ok(())
}

fn section<'a>(doc: &'a mut toml::Table, name: &str) -> Result<&'a mut toml::Table, ConfigError> {
    doc.entry(name)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| ConfigError::Invalid(format!("{name} must be a table")))
}

const SECTIONS: [&str; 6] = ["server", "filter", "tokenizer", "llm", "prompt", "pipeline"];

/// `FILTER_THRESHOLD=0.7` sets `filter.threshold`.
fn apply_override(doc: &mut toml::Table, rest: &str, value: &str) -> Result<(), ConfigError> {
    let lower = rest.to_ascii_lowercase();
    let Some(sec) = SECTIONS.iter().find(|s| lower.starts_with(&format!("{s}_"))) else {
        return Ok(());
    };
    let key = &lower[sec.len() + 1..];
    section(doc, sec)?.insert(key.to_string(), env_value(value));
    Ok(())
}

fn env_value(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if raw.contains(',') {
        return toml::Value::Array(raw.split(',').map(|s| toml::Value::String(s.trim().into())).collect());
    }
    toml::Value::String(raw.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults() {
        let cfg = ServiceConfig::from_sources("", env(&[])).unwrap();
        assert_eq!(cfg.filter.threshold, 0.5);
        assert_eq!(cfg.tokenizer.max_len, 128);
        assert_eq!(cfg.prompt.stage, PromptStage::S4);
        assert_eq!(cfg.llm.gen.temperature, 0.0);
        assert_eq!(cfg.llm.gen.max_output_tokens, 256);
        assert!(cfg.pipeline.concurrent);
    }

    #[test]
    fn file_then_env() {
        let text = r#"
[server]
bind = "0.0.0.0:9000"
cors_allow = ["chrome-extension://abc"]

[filter]
threshold = 0.6

[llm]
endpoint = "http://file/v1/chat/completions"
retries = 1

[prompt]
stage = "s5"
"#;
        let cfg = ServiceConfig::from_sources(
            text,
            env(&[
                ("TOXISHIELD_FILTER_THRESHOLD", "0.7"),
                ("TOXISHIELD_PIPELINE_CONCURRENT", "false"),
                ("LLM_ENDPOINT", "http://env/v1/chat/completions"),
                ("LLM_MODEL", "small"),
                ("UNRELATED", "x"),
            ]),
        )
        .unwrap();
        assert_eq!(cfg.server.cors_allow, ["chrome-extension://abc"]);
        assert_eq!(cfg.filter.threshold, 0.7);
        assert!(!cfg.pipeline.concurrent);
        assert_eq!(cfg.llm.endpoint.as_deref(), Some("http://env/v1/chat/completions"));
        assert_eq!(cfg.llm.model, "small");
        assert_eq!(cfg.llm.gen.retries, 1);
        assert_eq!(cfg.prompt.stage, PromptStage::S5);
    }

    #[test]
    fn rejects_secrets_and_bad_values() {
        assert!(matches!(
            ServiceConfig::from_sources("[llm]\napi_key = \"sk\"", env(&[])),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ServiceConfig::from_sources("[filter]\nthreshold = 1.5", env(&[])),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ServiceConfig::from_sources("[filter]\nbackend = \"serialized_model\"", env(&[])),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ServiceConfig::from_sources("[filter]\nbogus = 1", env(&[])),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(ServiceConfig::from_sources("not toml [", env(&[])), Err(ConfigError::Parse(_))));
    }
}
