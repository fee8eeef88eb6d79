//! Binary toxicity scoring and threshold gating.
//!
//! Two interchangeable backends produce a [`ToxicityScore`]:
//!
//! * a serialized sequence classifier (ONNX, optionally 8-bit quantized):
//!   tokenize, run the graph, softmax over two logits, take the toxic class;
//! * a deterministic lexicon surrogate, `p = 1 - 0.1^h * 0.7^a` over distinct
//!   profanity hits `h` and anger-marker hits `a`.
//!
//! Spaced-out spellings ("F U C K") are not de-obfuscated by either backend.

mod lexicon;
#[cfg(feature = "onnx")]
mod onnx;

use std::fmt;

use thiserror::Error;

pub use lexicon::{
    surrogate_probability, words, AngerMarker, Lexicon, LexiconHits, ANGER_WEIGHT,
    DEFAULT_ANGER, DEFAULT_PROFANITY, PROFANITY_WEIGHT,
};
#[cfg(feature = "onnx")]
pub use onnx::{softmax2, OnnxClassifier};

use crate::taxonomy::{BinaryLabel, TextSample, ToxicityScore};
use crate::tokenizer::TokenizerError;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("failed to load model: {0}")]
    ModelLoad(String),
    #[error("model output has {got} values, expected {expected} logits")]
    Shape { expected: usize, got: usize },
    #[error("empty input text")]
    EmptyInput,
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("unsupported backend {0:?}")]
    UnsupportedBackend(String),
    #[error(transparent)]
    Tokenizer(TokenizerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<TokenizerError> for FilterError {
    fn from(e: TokenizerError) -> Self {
        match e {
            TokenizerError::EmptyInput => FilterError::EmptyInput,
            other => FilterError::Tokenizer(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    SerializedModel,
    Lexicon,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::SerializedModel => "serialized_model",
            BackendKind::Lexicon => "lexicon",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "serialized_model" | "onnx" | "model" => Ok(BackendKind::SerializedModel),
            "lexicon" => Ok(BackendKind::Lexicon),
            other => Err(FilterError::UnsupportedBackend(other.to_string())),
        }
    }
}

#[derive(Debug)]
enum Backend {
    #[cfg(feature = "onnx")]
    Serialized(OnnxClassifier),
    Lexicon(Lexicon),
}

/// A loaded scorer plus its default decision threshold.
#[derive(Debug)]
pub struct ClassifierHandle {
    backend: Backend,
    model_id: String,
    threshold: f64,
}

impl ClassifierHandle {
    pub fn lexicon(lexicon: Lexicon) -> Self {
        Self {
            backend: Backend::Lexicon(lexicon),
            model_id: "lexicon-surrogate".into(),
            threshold: DEFAULT_THRESHOLD,
        }
    }

    #[cfg(feature = "onnx")]
    pub fn serialized(model: OnnxClassifier, model_id: impl Into<String>) -> Self {
        Self {
            backend: Backend::Serialized(model),
            model_id: model_id.into(),
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold.clamp(0.0, 1.0);
        self
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = id.into();
        self
    }

    pub fn kind(&self) -> BackendKind {
        match self.backend {
            #[cfg(feature = "onnx")]
            Backend::Serialized(_) => BackendKind::SerializedModel,
            Backend::Lexicon(_) => BackendKind::Lexicon,
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn score_text(&self, text: &str) -> Result<ToxicityScore, FilterError> {
        if text.trim().is_empty() {
            return Err(FilterError::EmptyInput);
        }
        let p = match &self.backend {
            #[cfg(feature = "onnx")]
            Backend::Serialized(model) => softmax2(model.logits(text)?).1,
            Backend::Lexicon(lex) => lex.score(text),
        };
        Ok(ToxicityScore::saturating(p))
    }

    pub fn score(&self, sample: &TextSample) -> Result<ToxicityScore, FilterError> {
        self.score_text(&sample.body)
    }

    /// Score and decide with the handle's own threshold.
    pub fn classify(&self, sample: &TextSample) -> Result<(ToxicityScore, BinaryLabel), FilterError> {
        let p = self.score(sample)?;
        Ok((p, decide(p, self.threshold)))
    }
}

pub fn score(sample: &TextSample, handle: &ClassifierHandle) -> Result<ToxicityScore, FilterError> {
    handle.score(sample)
}

/// Toxic iff `p >= threshold` (inclusive).
pub fn decide(score: ToxicityScore, threshold: f64) -> BinaryLabel {
    if score.value() >= threshold {
        BinaryLabel::Toxic
    } else {
        BinaryLabel::NonToxic
    }
}
