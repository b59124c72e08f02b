//! Chat-completion provider abstraction. One contract serves text and vision
//! models: (template id, variables, temperature, optional images) -> text.
//! Prompt templates are versioned repo artifacts; scripted tests key on their
//! ids, so template wording can evolve without touching test logic.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::transport::{Transport, TransportError};

pub const TEMPLATE_PLAN_ACTIONS: &str = "plan_actions.v1";
pub const TEMPLATE_SUBQUERIES: &str = "subqueries.v1";
pub const TEMPLATE_STRATEGY: &str = "strategy.v1";
pub const TEMPLATE_CITED_RESPONSE: &str = "cited_response.v1";
pub const TEMPLATE_CITATION_CHECK: &str = "citation_check.v1";
pub const TEMPLATE_SUGGESTIONS: &str = "suggestions.v1";
pub const TEMPLATE_VISION_REPORT: &str = "vision_report.v1";
pub const TEMPLATE_VISION_COMPARE: &str = "vision_compare.v1";

/// Every prompt template shipped with the engine, keyed by versioned id.
pub static TEMPLATES: &[(&str, &str)] = &[
    (TEMPLATE_PLAN_ACTIONS, include_str!("templates/plan_actions.v1.txt")),
    (TEMPLATE_SUBQUERIES, include_str!("templates/subqueries.v1.txt")),
    (TEMPLATE_STRATEGY, include_str!("templates/strategy.v1.txt")),
    (TEMPLATE_CITED_RESPONSE, include_str!("templates/cited_response.v1.txt")),
    (TEMPLATE_CITATION_CHECK, include_str!("templates/citation_check.v1.txt")),
    (TEMPLATE_SUGGESTIONS, include_str!("templates/suggestions.v1.txt")),
    (TEMPLATE_VISION_REPORT, include_str!("templates/vision_report.v1.txt")),
    (TEMPLATE_VISION_COMPARE, include_str!("templates/vision_compare.v1.txt")),
];

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("unknown prompt template {0}")]
    UnknownTemplate(String),
    #[error("no scripted response for template {0}")]
    NoScript(String),
    #[error("provider transport failed: {0}")]
    Transport(#[from] TransportError),
    #[error("provider response malformed: {0}")]
    MalformedResponse(String),
    #[error("missing API key environment variable {0}")]
    MissingApiKey(String),
    #[error("cannot read image {path}: {message}")]
    ImageUnreadable { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fills {{name}} placeholders in the named template. Placeholders without a
/// binding are replaced with the empty string so optional sections collapse.
pub fn render_template(
    template_id: &str,
    variables: &BTreeMap<String, String>,
) -> Result<String, ProviderError> {
    let body = TEMPLATES
        .iter()
        .find(|(id, _)| *id == template_id)
        .map(|(_, body)| *body)
        .ok_or_else(|| ProviderError::UnknownTemplate(template_id.to_string()))?;
    let mut out = String::with_capacity(body.len());
    let mut rest = body;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let name = &after[..close];
                if let Some(value) = variables.get(name) {
                    out.push_str(value);
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// One chat-completion request. `images` holds file paths for vision models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template_id: String,
    pub variables: BTreeMap<String, String>,
    pub temperature: f32,
    pub model: String,
    #[serde(default)]
    pub images: Vec<String>,
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

#[derive(Default)]
struct ScriptQueue {
    pending: VecDeque<String>,
    last: Option<String>,
}

/// Deterministic provider for tests and offline runs: responses are queued per
/// template id and consumed FIFO; an exhausted queue repeats its final entry,
/// so a single canned answer can serve a variable number of calls.
#[derive(Default)]
pub struct ScriptedProvider {
    queues: Mutex<HashMap<String, ScriptQueue>>,
}

/// On-disk script: {"templates": {"template.id": ["response", ...]}}.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScriptFile {
    pub templates: BTreeMap<String, Vec<String>>,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(map: BTreeMap<String, Vec<String>>) -> Self {
        let provider = Self::new();
        for (template_id, responses) in map {
            for response in responses {
                provider.push(&template_id, response);
            }
        }
        provider
    }

    pub fn from_script_file(path: &Path) -> Result<Self, ProviderError> {
        let content = std::fs::read_to_string(path)?;
        let script: ScriptFile = serde_json::from_str(&content)
            .map_err(|e| ProviderError::MalformedResponse(format!("script {path:?}: {e}")))?;
        Ok(Self::from_map(script.templates))
    }

    pub fn push(&self, template_id: &str, response: String) {
        let mut queues = self.queues.lock().unwrap();
        let queue = queues.entry(template_id.to_string()).or_default();
        queue.last = Some(response.clone());
        queue.pending.push_back(response);
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let mut queues = self.queues.lock().unwrap();
        let queue = queues
            .get_mut(&request.template_id)
            .ok_or_else(|| ProviderError::NoScript(request.template_id.clone()))?;
        match queue.pending.pop_front() {
            Some(response) => Ok(response),
            None => queue
                .last
                .clone()
                .ok_or_else(|| ProviderError::NoScript(request.template_id.clone())),
        }
    }
}

/// One completed provider call, as recorded in run transcripts. The sequence
/// of records per template id is enough to rebuild a scripted provider that
/// replays the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderCallRecord {
    pub template_id: String,
    pub model: String,
    pub temperature: f32,
    #[serde(default)]
    pub images: Vec<String>,
    pub response: String,
}

/// Decorator that appends every successful completion to a shared log.
pub struct LoggingProvider {
    inner: Arc<dyn ChatProvider>,
    log: Arc<Mutex<Vec<ProviderCallRecord>>>,
}

impl LoggingProvider {
    pub fn new(inner: Arc<dyn ChatProvider>, log: Arc<Mutex<Vec<ProviderCallRecord>>>) -> Self {
        Self { inner, log }
    }
}

impl ChatProvider for LoggingProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let response = self.inner.complete(request)?;
        self.log.lock().unwrap().push(ProviderCallRecord {
            template_id: request.template_id.clone(),
            model: request.model.clone(),
            temperature: request.temperature,
            images: request.images.clone(),
            response: response.clone(),
        });
        Ok(response)
    }
}

/// Thin adapter for chat-completion HTTP endpoints speaking the standard
/// messages contract. Vision requests embed images as base64 data URIs.
pub struct RemoteChatProvider {
    transport: Arc<dyn Transport>,
    endpoint: String,
    api_key_env: String,
}

impl RemoteChatProvider {
    pub fn new(transport: Arc<dyn Transport>, endpoint: String, api_key_env: String) -> Self {
        Self { transport, endpoint, api_key_env }
    }

    fn headers(&self) -> Result<Vec<(String, String)>, ProviderError> {
        let key = std::env::var(&self.api_key_env)
            .map_err(|_| ProviderError::MissingApiKey(self.api_key_env.clone()))?;
        Ok(vec![("Authorization".to_string(), format!("Bearer {key}"))])
    }
}

impl ChatProvider for RemoteChatProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let prompt = render_template(&request.template_id, &request.variables)?;
        let content = if request.images.is_empty() {
            json!(prompt)
        } else {
            let mut parts = vec![json!({"type": "text", "text": prompt})];
            for path in &request.images {
                let bytes = std::fs::read(path).map_err(|e| ProviderError::ImageUnreadable {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
                parts.push(json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:application/octet-stream;base64,{encoded}")}
                }));
            }
            json!(parts)
        };
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": content}],
        });
        let response = self.transport.post_json(&self.endpoint, &self.headers()?, &body)?;
        response
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                ProviderError::MalformedResponse("missing choices[0].message.content".into())
            })
    }
}
