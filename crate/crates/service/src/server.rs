use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};
use toxishield_core::llm::LlmError;
use toxishield_core::TextSample;

use crate::pipeline::{Engine, PipelineError};

/// Unknown fields are ignored so older services accept newer clients.
#[derive(Debug, Clone, Deserialize)]
pub struct AnalyzeRequest {
    pub text: String,
    #[serde(default)]
    pub id: Option<String>,
}

impl AnalyzeRequest {
    fn sample(self) -> TextSample {
        let id = self.id.unwrap_or_else(|| "request".into());
        TextSample::new(id, self.text)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub backend: String,
    pub model_id: String,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    kind: &'static str,
}

pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: String) -> Self {
        Self { status: StatusCode::BAD_REQUEST, kind: "bad_request", message }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let (status, kind) = match &e {
            PipelineError::EmptyInput | PipelineError::Llm(LlmError::EmptyInput) => {
                (StatusCode::BAD_REQUEST, "empty_input")
            }
            PipelineError::LlmUnavailable => (StatusCode::SERVICE_UNAVAILABLE, "llm_unavailable"),
            PipelineError::Timeout(_) => (StatusCode::GATEWAY_TIMEOUT, "timeout"),
            PipelineError::Llm(_) => (StatusCode::BAD_GATEWAY, "llm_error"),
            PipelineError::Internal(_) | PipelineError::Startup(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        Self { status, kind, message: e.to_string() }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message, kind: self.kind })).into_response()
    }
}

type Body = Result<Json<AnalyzeRequest>, JsonRejection>;

async fn analyze(State(engine): State<Arc<Engine>>, body: Body) -> Result<Response, ApiError> {
    let sample = body?.0.sample();
    Ok(Json(engine.analyze(&sample).await?).into_response())
}

async fn classify(State(engine): State<Arc<Engine>>, body: Body) -> Result<Response, ApiError> {
    let sample = body?.0.sample();
    Ok(Json(engine.classify(&sample).await?).into_response())
}

async fn detoxify(State(engine): State<Arc<Engine>>, body: Body) -> Result<Response, ApiError> {
    let sample = body?.0.sample();
    Ok(Json(engine.detoxify(&sample).await?).into_response())
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<Health> {
    let c = engine.classifier();
    Json(Health { status: "ok".into(), backend: c.kind().to_string(), model_id: c.model_id().to_string() })
}

pub fn cors(allow: &[String]) -> CorsLayer {
    let origins: Vec<HeaderValue> = allow.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([axum::http::header::CONTENT_TYPE])
}

pub fn router(engine: Arc<Engine>, cors_allow: &[String]) -> Router {
    Router::new()
        .route("/v1/analyze", post(analyze))
        .route("/v1/classify", post(classify))
        .route("/v1/detoxify", post(detoxify))
        .route("/v1/health", get(health))
        .layer(cors(cors_allow))
        .with_state(engine)
}

pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
