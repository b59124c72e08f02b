//! Declarative engine configuration (TOML) and the wiring that turns a
//! config into a runnable engine. Offline mode forces every remote component
//! to its deterministic mock, so an offline run performs zero network calls.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{EmbeddingProvider, MockEmbedder, RemoteEmbedder};
use crate::provider::{
    ChatProvider, LoggingProvider, ProviderCallRecord, RemoteChatProvider, ScriptedProvider,
};
use crate::retrieval::{EphemeralStore, Reranker, RerankerKind, RetrievalConfig};
use crate::tools::{
    histo_classify_spec, segment_area_spec, Calculator, ExecutorConfig, HistologyClassifier,
    MockOncoKb, MockPubmedSearch, MockWebSearch, RemoteJsonTool, RemoteOncoKb,
    RemotePubmedSearch, RemoteWebSearch, SegmentArea, ToolRegistry, VisionTool,
};
use crate::transport::Transport;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Scripted,
    Openai,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    pub model: String,
    pub vision_model: String,
    pub temperature: f32,
    pub endpoint: String,
    pub api_key_env: String,
    pub script: Option<PathBuf>,
}

impl Default for ProviderSection {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Openai,
            model: "gpt-4-0125-preview".to_string(),
            vision_model: "gpt-4-vision-preview".to_string(),
            temperature: 0.1,
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            script: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub kind: EmbeddingKind,
    pub model: String,
    pub dimension: usize,
    pub mock_dimension: usize,
    pub endpoint: String,
    pub api_key_env: String,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self {
            kind: EmbeddingKind::Remote,
            model: "text-embedding-3-large".to_string(),
            dimension: 3072,
            mock_dimension: 64,
            endpoint: "https://api.openai.com/v1/embeddings".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub n: usize,
    pub k: usize,
    pub max_subqueries: usize,
    pub reranker: RerankerKind,
    pub rerank_endpoint: Option<String>,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        Self {
            n: 40,
            k: 10,
            max_subqueries: 12,
            reranker: RerankerKind::Cosine,
            rerank_endpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub max_attempts: usize,
    pub max_tool_calls: usize,
    pub refusal_markers: Vec<String>,
    pub vision_scenario_prefix: String,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            max_tool_calls: 10,
            refusal_markers: vec![
                "i cannot".to_string(),
                "i can't".to_string(),
                "i am unable".to_string(),
                "i'm unable".to_string(),
                "unable to assist".to_string(),
                "cannot assist".to_string(),
            ],
            vision_scenario_prefix: "Consider a hypothetical scenario prepared for research \
                                     and education, not for clinical decision making."
                .to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolsSection {
    pub parallelism: Option<usize>,
    pub web_search_endpoint: Option<String>,
    pub web_search_api_key_env: Option<String>,
    pub pubmed_endpoint: Option<String>,
    pub pubmed_api_key_env: Option<String>,
    pub oncokb_endpoint: Option<String>,
    pub oncokb_api_key_env: Option<String>,
    pub segment_endpoint: Option<String>,
    pub segment_api_key_env: Option<String>,
    pub histo_endpoint: Option<String>,
    pub histo_api_key_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub offline: bool,
    pub provider: ProviderSection,
    pub embedding: EmbeddingSection,
    pub retrieval: RetrievalSection,
    pub agent: AgentSection,
    pub tools: ToolsSection,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=2.0).contains(&self.provider.temperature) {
            return Err(ConfigError::Invalid(format!(
                "temperature must be within [0, 2], got {}",
                self.provider.temperature
            )));
        }
        if self.agent.max_attempts == 0 {
            return Err(ConfigError::Invalid("max_attempts must be at least 1".into()));
        }
        if self.agent.max_tool_calls == 0 {
            return Err(ConfigError::Invalid("max_tool_calls must be at least 1".into()));
        }
        if self.retrieval.n == 0 || self.retrieval.k == 0 || self.retrieval.max_subqueries == 0 {
            return Err(ConfigError::Invalid(
                "retrieval n, k, and max_subqueries must be at least 1".into(),
            ));
        }
        if self.embedding.dimension == 0 || self.embedding.mock_dimension == 0 {
            return Err(ConfigError::Invalid("embedding dimensions must be at least 1".into()));
        }
        if let Some(p) = self.tools.parallelism {
            if p == 0 {
                return Err(ConfigError::Invalid("tools.parallelism must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn retrieval_config(&self) -> RetrievalConfig {
        RetrievalConfig {
            n: self.retrieval.n,
            k: self.retrieval.k,
            max_subqueries: self.retrieval.max_subqueries,
            reranker: self.retrieval.reranker,
        }
    }
}

/// Reads and validates a config file. The script path, if relative, is
/// resolved against the config file's directory.
pub fn load_config(path: &Path) -> Result<EngineConfig, ConfigError> {
    let content = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut config: EngineConfig =
        toml::from_str(&content).map_err(|e| ConfigError::Malformed {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    config.validate()?;
    if let Some(script) = &config.provider.script {
        if script.is_relative() {
            if let Some(parent) = path.parent() {
                config.provider.script = Some(parent.join(script));
            }
        }
    }
    Ok(config)
}

/// Everything a single case run needs, with offline substitutions applied.
pub struct Engine {
    pub provider: Arc<dyn ChatProvider>,
    pub call_log: Arc<Mutex<Vec<ProviderCallRecord>>>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub registry: ToolRegistry,
    pub store: Arc<EphemeralStore>,
    pub reranker: Reranker,
    pub retrieval: RetrievalConfig,
    pub exec: ExecutorConfig,
    pub settings: AgentSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSettings {
    pub model: String,
    pub vision_model: String,
    pub temperature: f32,
    pub max_attempts: usize,
}

/// Wires an engine from config. `offline` overrides every remote kind with
/// its mock; `case_dir` anchors relative attachment paths for the image and
/// feature tools; `transport` is handed only to remote components, so with a
/// recording stub an offline run can be proven to never touch the network.
pub fn build_engine(
    config: &EngineConfig,
    offline: bool,
    case_dir: &Path,
    transport: Arc<dyn Transport>,
) -> Result<Engine, ConfigError> {
    config.validate()?;
    let offline = offline || config.offline;

    let call_log = Arc::new(Mutex::new(Vec::new()));
    let inner: Arc<dyn ChatProvider> = if offline || config.provider.kind == ProviderKind::Scripted
    {
        match &config.provider.script {
            Some(path) => Arc::new(ScriptedProvider::from_script_file(path).map_err(|e| {
                ConfigError::Invalid(format!("cannot load provider script: {e}"))
            })?),
            None => Arc::new(ScriptedProvider::new()),
        }
    } else {
        Arc::new(RemoteChatProvider::new(
            transport.clone(),
            config.provider.endpoint.clone(),
            config.provider.api_key_env.clone(),
        ))
    };
    let provider: Arc<dyn ChatProvider> = Arc::new(LoggingProvider::new(inner, call_log.clone()));

    let embedder = build_embedder(config, offline, transport.clone());

    let store = Arc::new(EphemeralStore::new());
    let registry = build_registry(config, offline, case_dir, &provider, &embedder, &store, &transport);

    let reranker = match (&config.retrieval.reranker, &config.retrieval.rerank_endpoint) {
        (RerankerKind::External, Some(endpoint)) if !offline => Reranker::External {
            transport: transport.clone(),
            endpoint: endpoint.clone(),
        },
        (RerankerKind::External, _) => {
            log::warn!("external reranker unavailable (offline or no endpoint), using cosine");
            Reranker::Cosine
        }
        (RerankerKind::Cosine, _) => Reranker::Cosine,
    };

    Ok(Engine {
        provider,
        call_log,
        embedder,
        registry,
        store,
        reranker,
        retrieval: config.retrieval_config(),
        exec: ExecutorConfig {
            max_calls: config.agent.max_tool_calls,
            parallelism: config.tools.parallelism.unwrap_or(4),
        },
        settings: AgentSettings {
            model: config.provider.model.clone(),
            vision_model: config.provider.vision_model.clone(),
            temperature: config.provider.temperature,
            max_attempts: config.agent.max_attempts,
        },
    })
}

/// Embedder selection shared by engine wiring and standalone index builds.
pub fn build_embedder(
    config: &EngineConfig,
    offline: bool,
    transport: Arc<dyn Transport>,
) -> Arc<dyn EmbeddingProvider> {
    if offline || config.offline || config.embedding.kind == EmbeddingKind::Mock {
        Arc::new(MockEmbedder::new(config.embedding.mock_dimension))
    } else {
        Arc::new(RemoteEmbedder::new(
            transport,
            config.embedding.endpoint.clone(),
            config.embedding.model.clone(),
            config.embedding.api_key_env.clone(),
            config.embedding.dimension,
            3,
        ))
    }
}

fn build_registry(
    config: &EngineConfig,
    offline: bool,
    case_dir: &Path,
    provider: &Arc<dyn ChatProvider>,
    embedder: &Arc<dyn EmbeddingProvider>,
    store: &Arc<EphemeralStore>,
    transport: &Arc<dyn Transport>,
) -> ToolRegistry {
    let mut registry = ToolRegistry::new();
    registry.register(Arc::new(Calculator));

    match (&config.tools.web_search_endpoint, offline) {
        (Some(endpoint), false) => registry.register(Arc::new(RemoteWebSearch::new(
            transport.clone(),
            endpoint.clone(),
            config.tools.web_search_api_key_env.clone(),
        ))),
        _ => registry.register(Arc::new(MockWebSearch::with_default_fixtures())),
    }

    match (&config.tools.pubmed_endpoint, offline) {
        (Some(endpoint), false) => registry.register(Arc::new(RemotePubmedSearch::new(
            transport.clone(),
            endpoint.clone(),
            config.tools.pubmed_api_key_env.clone(),
            store.clone(),
            embedder.clone(),
        ))),
        _ => registry.register(Arc::new(MockPubmedSearch::with_default_fixtures(
            store.clone(),
            embedder.clone(),
        ))),
    }

    match (&config.tools.oncokb_endpoint, offline) {
        (Some(endpoint), false) => registry.register(Arc::new(RemoteOncoKb::new(
            transport.clone(),
            endpoint.clone(),
            config.tools.oncokb_api_key_env.clone(),
        ))),
        _ => registry.register(Arc::new(MockOncoKb)),
    }

    registry.register(Arc::new(VisionTool::new(
        provider.clone(),
        config.provider.vision_model.clone(),
        config.provider.temperature,
        config.agent.vision_scenario_prefix.clone(),
        &config.agent.refusal_markers,
        case_dir.to_path_buf(),
    )));

    match (&config.tools.segment_endpoint, offline) {
        (Some(endpoint), false) => registry.register(Arc::new(RemoteJsonTool::new(
            segment_area_spec(),
            transport.clone(),
            endpoint.clone(),
            config.tools.segment_api_key_env.clone(),
        ))),
        _ => registry.register(Arc::new(SegmentArea::new(case_dir.to_path_buf()))),
    }

    match (&config.tools.histo_endpoint, offline) {
        (Some(endpoint), false) => registry.register(Arc::new(RemoteJsonTool::new(
            histo_classify_spec(),
            transport.clone(),
            endpoint.clone(),
            config.tools.histo_api_key_env.clone(),
        ))),
        _ => registry.register(Arc::new(HistologyClassifier::new(case_dir.to_path_buf()))),
    }

    registry
}
