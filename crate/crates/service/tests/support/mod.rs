#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use toxishield_core::llm::{render_coach_xml, render_reframe_text, ChatClient, ClientError, GenParams};
use toxishield_core::{CategoryLabel, LabelSet};
use toxishield_service::server::router;
use toxishield_service::Engine;

/// Text between the last comment fence in a prompt.
pub fn fenced(prompt: &str) -> String {
    let start = prompt.rfind("<comment>\n").map(|i| i + "<comment>\n".len()).unwrap_or(0);
    let end = prompt.rfind("\n</comment>").unwrap_or(prompt.len());
    prompt[start..end].to_string()
}

pub fn is_reframe_prompt(prompt: &str) -> bool {
    prompt.contains("Detoxified:")
}

/// Echoes the fenced comment back: as the Coach rationale and as the
/// Reframer rewrite. Counts calls per comment.
#[derive(Default)]
pub struct MockLlm {
    pub calls: Mutex<HashMap<String, usize>>,
    pub delay: Option<Duration>,
    pub slow_reframer: Option<Duration>,
    pub fail_coach: bool,
}

impl MockLlm {
    pub fn total(&self) -> usize {
        self.calls.lock().unwrap().values().sum()
    }

    pub fn calls_by_comment(&self) -> HashMap<String, usize> {
        self.calls.lock().unwrap().clone()
    }
}

impl ChatClient for MockLlm {
    fn complete(&self, prompt: &str, _params: &GenParams) -> Result<String, ClientError> {
        let comment = fenced(prompt);
        *self.calls.lock().unwrap().entry(comment.clone()).or_default() += 1;
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        if is_reframe_prompt(prompt) {
            if let Some(d) = self.slow_reframer {
                std::thread::sleep(d);
            }
            Ok(render_reframe_text(&comment, "softened the wording"))
        } else if self.fail_coach {
            Err(ClientError::Status { code: 500, body: "boom".into() })
        } else {
            Ok(render_coach_xml(&LabelSet::single(CategoryLabel::Insult), &comment))
        }
    }

    fn model_name(&self) -> &str {
        "mock"
    }
}

/// Serves `engine` on an ephemeral port; returns the base URL.
pub async fn start_server(engine: Arc<Engine>, cors: &[String]) -> (String, tokio::task::JoinHandle<()>) {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(engine, cors);
    let handle = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    (format!("http://{addr}"), handle)
}
