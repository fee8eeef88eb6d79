//! Filter → (Coach ∥ Reframer) orchestration.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;
use toxishield_core::filter::{decide, ClassifierHandle, FilterError, Lexicon};
use toxishield_core::llm::{
    classify_subcategories, detoxify_with, ChatClient, ClassificationResult, DetoxResult, GenParams,
    HttpChatClient, HttpClientConfig, LlmError, PromptConfig, ReframeConfig,
};
use toxishield_core::{BinaryLabel, TextSample, ToxicityScore};

use crate::config::ServiceConfig;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("empty input text")]
    EmptyInput,
    #[error("filter failed: {0}")]
    Internal(String),
    #[error("no LLM endpoint configured")]
    LlmUnavailable,
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("stage timed out after {0:?}")]
    Timeout(Duration),
    #[error("startup: {0}")]
    Startup(String),
}

impl From<FilterError> for PipelineError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::EmptyInput => PipelineError::EmptyInput,
            other => PipelineError::Internal(other.to_string()),
        }
    }
}

/// Wall-clock milliseconds. `filter_ms + llm_ms = total_ms`; `coach_ms` and
/// `reframer_ms` are the individual calls inside `llm_ms`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub filter_ms: f64,
    pub llm_ms: f64,
    pub total_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coach_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reframer_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degraded {
    pub coach: bool,
    pub reframer: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coach_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reframer_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisVerdict {
    pub id: String,
    pub score: ToxicityScore,
    pub label: BinaryLabel,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detox: Option<DetoxResult>,
    pub timings: Timings,
    pub degraded: Degraded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageOptions {
    pub concurrent: bool,
    pub coach_timeout: Duration,
    pub reframer_timeout: Duration,
}

impl Default for StageOptions {
    fn default() -> Self {
        Self { concurrent: true, coach_timeout: Duration::from_secs(60), reframer_timeout: Duration::from_secs(60) }
    }
}

pub struct Engine {
    classifier: Arc<ClassifierHandle>,
    llm: Option<Arc<dyn ChatClient>>,
    prompt: Arc<PromptConfig>,
    reframe: Arc<ReframeConfig>,
    gen: GenParams,
    stages: StageOptions,
    llm_slots: Arc<Semaphore>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl Engine {
    pub fn new(classifier: ClassifierHandle, llm: Option<Arc<dyn ChatClient>>) -> Self {
        Self {
            classifier: Arc::new(classifier),
            llm,
            prompt: Arc::new(PromptConfig::default()),
            reframe: Arc::new(ReframeConfig::default()),
            gen: GenParams::default(),
            stages: StageOptions::default(),
            llm_slots: Arc::new(Semaphore::new(16)),
        }
    }

    pub fn with_prompt(mut self, prompt: PromptConfig) -> Self {
        self.prompt = Arc::new(prompt);
        self
    }

    pub fn with_reframe(mut self, reframe: ReframeConfig) -> Self {
        self.reframe = Arc::new(reframe);
        self
    }

    pub fn with_gen(mut self, gen: GenParams) -> Self {
        self.gen = gen;
        self
    }

    pub fn with_stages(mut self, stages: StageOptions) -> Self {
        self.stages = stages;
        self
    }

    pub fn with_llm_limit(mut self, n: usize) -> Self {
        self.llm_slots = Arc::new(Semaphore::new(n.max(1)));
        self
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, PipelineError> {
        let startup = |e: &dyn std::fmt::Display| PipelineError::Startup(e.to_string());
        let lexicon = match &cfg.filter.lexicon_path {
            Some(p) => Lexicon::load(p, cfg.filter.anger_path.as_deref()).map_err(|e| startup(&e))?,
            None => Lexicon::default(),
        };
        let classifier = build_classifier(cfg, lexicon.clone())?.with_threshold(cfg.filter.threshold);
        let llm: Option<Arc<dyn ChatClient>> = match &cfg.llm.endpoint {
            Some(endpoint) => Some(Arc::new(
                HttpChatClient::new(HttpClientConfig {
                    endpoint: endpoint.clone(),
                    model: cfg.llm.model.clone(),
                    api_key: cfg.api_key(),
                })
                .map_err(|e| startup(&e))?,
            )),
            None => None,
        };
        let prompt = match &cfg.prompt.coach_path {
            Some(p) => PromptConfig::load(p, &lexicon).map_err(|e| startup(&e))?,
            None => PromptConfig::from_text(toxishield_core::llm::DEFAULT_COACH_PROMPT, &lexicon)
                .map_err(|e| startup(&e))?,
        }
        .with_stage(cfg.prompt.stage);
        for w in prompt.validate().map_err(|e| startup(&e))? {
            tracing::warn!(warning = %w, "coach prompt");
        }
        let reframe = match &cfg.prompt.reframe_path {
            Some(p) => ReframeConfig::load(p).map_err(|e| startup(&e))?,
            None => ReframeConfig::default(),
        };
        for w in reframe.validate() {
            tracing::warn!(warning = %w, "reframe prompt");
        }
        Ok(Self::new(classifier, llm)
            .with_prompt(prompt)
            .with_reframe(reframe)
            .with_gen(cfg.llm.gen.clone())
            .with_llm_limit(cfg.llm.max_concurrent)
            .with_stages(StageOptions {
                concurrent: cfg.pipeline.concurrent,
                coach_timeout: Duration::from_millis(cfg.pipeline.coach_timeout_ms),
                reframer_timeout: Duration::from_millis(cfg.pipeline.reframer_timeout_ms),
            }))
    }

    pub fn classifier(&self) -> &ClassifierHandle {
        &self.classifier
    }

    pub fn has_llm(&self) -> bool {
        self.llm.is_some()
    }

    pub async fn score(&self, sample: &TextSample) -> Result<ToxicityScore, PipelineError> {
        sample.ensure_non_empty().map_err(|_| PipelineError::EmptyInput)?;
        let classifier = self.classifier.clone();
        let body = sample.body.clone();
        tokio::task::spawn_blocking(move || classifier.score_text(&body))
            .await
            .map_err(|e| PipelineError::Internal(e.to_string()))?
            .map_err(PipelineError::from)
    }

    async fn run_llm<T: Send + 'static>(
        &self,
        timeout: Duration,
        call: impl FnOnce(&dyn ChatClient) -> Result<T, LlmError> + Send + 'static,
    ) -> Result<(T, f64), PipelineError> {
        let client = self.llm.clone().ok_or(PipelineError::LlmUnavailable)?;
        let slots = self.llm_slots.clone();
        let started = Instant::now();
        let work = async move {
            let permit = slots.acquire_owned().await.map_err(|e| PipelineError::Internal(e.to_string()))?;
            tokio::task::spawn_blocking(move || {
                let _permit = permit;
                call(client.as_ref())
            })
            .await
            .map_err(|e| PipelineError::Internal(e.to_string()))?
            .map_err(PipelineError::from)
        };
        let out = tokio::time::timeout(timeout, work).await.map_err(|_| PipelineError::Timeout(timeout))??;
        Ok((out, ms(started.elapsed())))
    }

    pub async fn classify(&self, sample: &TextSample) -> Result<ClassificationResult, PipelineError> {
        sample.ensure_non_empty().map_err(|_| PipelineError::EmptyInput)?;
        Ok(self.coach(sample.clone()).await?.0)
    }

    pub async fn detoxify(&self, sample: &TextSample) -> Result<DetoxResult, PipelineError> {
        sample.ensure_non_empty().map_err(|_| PipelineError::EmptyInput)?;
        Ok(self.reframer(sample.clone()).await?.0)
    }

    async fn coach(&self, sample: TextSample) -> Result<(ClassificationResult, f64), PipelineError> {
        let (prompt, gen) = (self.prompt.clone(), self.gen.clone());
        self.run_llm(self.stages.coach_timeout, move |c| classify_subcategories(&sample, c, &prompt, &gen)).await
    }

    async fn reframer(&self, sample: TextSample) -> Result<(DetoxResult, f64), PipelineError> {
        let (reframe, gen) = (self.reframe.clone(), self.gen.clone());
        self.run_llm(self.stages.reframer_timeout, move |c| detoxify_with(&sample, c, &reframe, &gen)).await
    }

    /// Scores the sample; only toxic samples reach the LLM stages, and a
    /// failing LLM stage degrades the verdict instead of failing it.
    pub async fn analyze(&self, sample: &TextSample) -> Result<AnalysisVerdict, PipelineError> {
        let t0 = Instant::now();
        let score = self.score(sample).await?;
        let threshold = self.classifier.threshold();
        let label = decide(score, threshold);
        let t1 = Instant::now();

        let mut verdict = AnalysisVerdict {
            id: sample.id.clone(),
            score,
            label,
            threshold,
            classification: None,
            detox: None,
            timings: Timings::default(),
            degraded: Degraded::default(),
        };

        if label == BinaryLabel::Toxic {
            let (coach, reframer) = if self.stages.concurrent {
                tokio::join!(self.coach(sample.clone()), self.reframer(sample.clone()))
            } else {
                let c = self.coach(sample.clone()).await;
                (c, self.reframer(sample.clone()).await)
            };
            match coach {
                Ok((c, t)) => {
                    verdict.classification = Some(c);
                    verdict.timings.coach_ms = Some(t);
                }
                Err(e) => {
                    tracing::warn!(id = %sample.id, error = %e, "coach degraded");
                    verdict.degraded.coach = true;
                    verdict.degraded.coach_error = Some(e.to_string());
                }
            }
            match reframer {
                Ok((d, t)) => {
                    verdict.detox = Some(d);
                    verdict.timings.reframer_ms = Some(t);
                }
                Err(e) => {
                    tracing::warn!(id = %sample.id, error = %e, "reframer degraded");
                    verdict.degraded.reframer = true;
                    verdict.degraded.reframer_error = Some(e.to_string());
                }
            }
        }

        let t2 = Instant::now();
        verdict.timings.filter_ms = ms(t1 - t0);
        verdict.timings.llm_ms = ms(t2 - t1);
        verdict.timings.total_ms = ms(t2 - t0);
        Ok(verdict)
    }
}

fn build_classifier(cfg: &ServiceConfig, lexicon: Lexicon) -> Result<ClassifierHandle, PipelineError> {
    use toxishield_core::filter::BackendKind;
    match cfg.filter.backend {
        BackendKind::Lexicon => Ok(ClassifierHandle::lexicon(lexicon)),
        #[cfg(feature = "onnx")]
        BackendKind::SerializedModel => {
            use toxishield_core::filter::OnnxClassifier;
            use toxishield_core::tokenizer::Vocab;
            let (Some(model), Some(vocab)) = (&cfg.filter.model_path, &cfg.filter.vocab_path) else {
                return Err(PipelineError::Startup("serialized_model needs model_path and vocab_path".into()));
            };
            let vocab = Vocab::load(vocab).map_err(|e| PipelineError::Startup(e.to_string()))?;
            let model = OnnxClassifier::load(model, vocab, cfg.tokenizer.max_len)
                .map_err(|e| PipelineError::Startup(e.to_string()))?;
            let id = cfg.filter.model_path.as_ref().and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned());
            Ok(ClassifierHandle::serialized(model, id.unwrap_or_else(|| "onnx".into())))
        }
        #[cfg(not(feature = "onnx"))]
        BackendKind::SerializedModel => {
            Err(PipelineError::Startup("built without the onnx feature".into()))
        }
    }
}
