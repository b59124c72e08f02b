//! Tool registry and invocation contract. Tools are described by JSON
//! function-calling specs, invoked with JSON arguments, and return JSON
//! outputs plus a short human-readable summary for transcripts.

mod builtins;
mod exec;

pub use builtins::{
    calculator_spec, histo_classify_spec, oncokb_spec, pubmed_search_spec, segment_area_spec,
    vision_report_spec, web_search_spec, Calculator, HistologyClassifier, MockOncoKb,
    MockPubmedSearch, MockWebSearch, RemoteJsonTool, RemoteOncoKb, RemotePubmedSearch,
    RemoteWebSearch, SegmentArea, VisionTool,
};
pub use exec::{
    execute_plan, parse_plan, validate_plan, ExecOutcome, ExecutorConfig, PlanCall, PlanError,
    ToolCallStatus, ToolResult,
};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map as JsonMap, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("invalid arguments for {tool}: {message}")]
    InvalidArguments { tool: String, message: String },
    #[error("{tool} refused the request: {message}")]
    Refused { tool: String, message: String },
    #[error("{tool} failed: {message}")]
    Failed { tool: String, message: String },
}

impl ToolError {
    pub fn is_refusal(&self) -> bool {
        matches!(self, ToolError::Refused { .. })
    }
}

/// One parameter in a tool spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub description: String,
}

/// Function-calling description of a tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: ParametersSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametersSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub properties: BTreeMap<String, ParamSpec>,
    pub required: Vec<String>,
}

impl ToolSpec {
    pub fn new(
        name: &str,
        description: &str,
        params: &[(&str, &str, &str, bool)],
    ) -> Self {
        let mut properties = BTreeMap::new();
        let mut required = Vec::new();
        for (pname, kind, desc, req) in params {
            properties.insert(
                pname.to_string(),
                ParamSpec { kind: kind.to_string(), description: desc.to_string() },
            );
            if *req {
                required.push(pname.to_string());
            }
        }
        Self {
            name: name.to_string(),
            description: description.to_string(),
            parameters: ParametersSpec { kind: "object".to_string(), properties, required },
        }
    }
}

/// What a tool invocation produced: structured output for downstream
/// reference substitution, and a summary line for the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub output: Value,
    pub summary: String,
}

pub trait Tool: Send + Sync {
    fn spec(&self) -> ToolSpec;
    fn invoke(&self, arguments: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError>;
}

/// Name-keyed tool collection. Iterates in lexicographic name order.
#[derive(Default, Clone)]
pub struct ToolRegistry {
    tools: BTreeMap<String, Arc<dyn Tool>>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tool: Arc<dyn Tool>) {
        self.tools.insert(tool.spec().name, tool);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Tool>> {
        self.tools.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn specs(&self) -> Vec<ToolSpec> {
        self.tools.values().map(|t| t.spec()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.tools.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }
}

pub(crate) fn required_str<'a>(
    args: &'a JsonMap<String, Value>,
    tool: &str,
    key: &str,
) -> Result<&'a str, ToolError> {
    args.get(key).and_then(Value::as_str).ok_or_else(|| ToolError::InvalidArguments {
        tool: tool.to_string(),
        message: format!("missing string argument '{key}'"),
    })
}
