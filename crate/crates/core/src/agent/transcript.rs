//! Schema-versioned run record: everything a case run produced, in enough
//! detail to audit citations and to replay the run deterministically.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::provider::ProviderCallRecord;
use crate::retrieval::{NumberedSource, RankedPassage, RetrievalConfig, Subquery};
use crate::tools::{PlanCall, ToolResult};
use crate::util::{atomic_write, now_iso8601};

use super::AgentError;

pub const TRANSCRIPT_SCHEMA: &str = "oncoagent.transcript/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Refused,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub stage: String,
    pub at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubqueryPassages {
    pub subquery: String,
    pub passages: Vec<RankedPassage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub steps: Vec<String>,
    pub missing_information: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub text: String,
    pub citations: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supported,
    Unsupported,
    Uncited,
    InvalidReference,
    Unchecked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationVerdict {
    pub statement_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation: Option<usize>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub schema: String,
    pub case_id: String,
    pub status: RunStatus,
    pub attempt: usize,
    pub max_attempts: usize,
    pub question: String,
    pub retrieval: RetrievalConfig,
    pub plan: Vec<PlanCall>,
    pub tool_results: Vec<ToolResult>,
    pub subqueries: Vec<Subquery>,
    pub per_subquery_passages: Vec<SubqueryPassages>,
    pub sources: Vec<NumberedSource>,
    pub strategy: Option<Strategy>,
    pub statements: Vec<Statement>,
    pub initial_verdicts: Vec<CitationVerdict>,
    pub verdicts: Vec<CitationVerdict>,
    pub repaired: bool,
    pub suggestions: String,
    pub final_text: String,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub provider_calls: Vec<ProviderCallRecord>,
    pub timeline: Vec<TimelineEntry>,
}

impl Transcript {
    pub fn new(
        case_id: &str,
        question: &str,
        retrieval: RetrievalConfig,
        attempt: usize,
        max_attempts: usize,
    ) -> Self {
        Self {
            schema: TRANSCRIPT_SCHEMA.to_string(),
            case_id: case_id.to_string(),
            status: RunStatus::Error,
            attempt,
            max_attempts,
            question: question.to_string(),
            retrieval,
            plan: Vec::new(),
            tool_results: Vec::new(),
            subqueries: Vec::new(),
            per_subquery_passages: Vec::new(),
            sources: Vec::new(),
            strategy: None,
            statements: Vec::new(),
            initial_verdicts: Vec::new(),
            verdicts: Vec::new(),
            repaired: false,
            suggestions: String::new(),
            final_text: String::new(),
            error: None,
            warnings: Vec::new(),
            provider_calls: Vec::new(),
            timeline: Vec::new(),
        }
    }

    pub fn mark(&mut self, stage: &str) {
        self.timeline.push(TimelineEntry { stage: stage.to_string(), at: now_iso8601() });
    }

    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    pub fn fail(mut self, message: String) -> Self {
        log::error!("run failed: {message}");
        self.status = RunStatus::Error;
        self.error = Some(message);
        self.mark("error");
        self
    }

    /// Source number -> chunk id over the recorded numbered sources.
    pub fn provenance(&self) -> BTreeMap<usize, String> {
        self.sources.iter().map(|s| (s.number, s.chunk_id.clone())).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("transcript serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        atomic_write(path, self.to_json_pretty().as_bytes()).map_err(|source| AgentError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let content = std::fs::read_to_string(path).map_err(|source| AgentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let transcript: Transcript =
            serde_json::from_str(&content).map_err(|e| AgentError::Malformed {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        if transcript.schema != TRANSCRIPT_SCHEMA {
            return Err(AgentError::Malformed {
                path: path.display().to_string(),
                message: format!(
                    "unsupported transcript schema '{}', expected '{}'",
                    transcript.schema, TRANSCRIPT_SCHEMA
                ),
            });
        }
        Ok(transcript)
    }

    /// JSON view with wall-clock timestamps removed; equal across repeated
    /// runs of the same scripted inputs.
    pub fn normalized(&self) -> Value {
        let mut value = serde_json::to_value(self).expect("transcript serializes");
        strip_timestamps(&mut value);
        value
    }

    /// Like `normalized`, additionally dropping the provider call log. Replay
    /// never re-invokes tools, so provider calls made from inside tools (the
    /// vision reports) cannot reappear; everything else must match.
    pub fn replay_view(&self) -> Value {
        let mut value = self.normalized();
        if let Some(map) = value.as_object_mut() {
            map.remove("provider_calls");
        }
        value
    }
}

fn strip_timestamps(value: &mut Value) {
    if let Some(timeline) = value.get_mut("timeline").and_then(Value::as_array_mut) {
        for entry in timeline {
            if let Some(map) = entry.as_object_mut() {
                map.remove("at");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Transcript {
        let mut t = Transcript::new("case-1", "what now?", RetrievalConfig::default(), 1, 3);
        t.status = RunStatus::Ok;
        t.mark("plan");
        t.mark("done");
        t.statements.push(Statement { text: "All clear.".into(), citations: vec![1] });
        t.sources.push(NumberedSource {
            number: 1,
            chunk_id: "doc:w128:t0".into(),
            text: "evidence".into(),
            metadata: BTreeMap::new(),
        });
        t.provider_calls.push(ProviderCallRecord {
            template_id: "strategy.v1".into(),
            model: "m".into(),
            temperature: 0.1,
            images: vec![],
            response: "1. step".into(),
        });
        t
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let t = sample();
        t.save(&path).unwrap();
        let loaded = Transcript::load(&path).unwrap();
        assert_eq!(loaded, t);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let mut t = sample();
        t.schema = "something/else".into();
        std::fs::write(&path, serde_json::to_string(&t).unwrap()).unwrap();
        let err = Transcript::load(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported transcript schema"));
    }

    #[test]
    fn normalized_strips_only_timestamps() {
        let t = sample();
        let norm = t.normalized();
        let timeline = norm.get("timeline").unwrap().as_array().unwrap();
        assert_eq!(timeline.len(), 2);
        assert!(timeline[0].get("at").is_none());
        assert_eq!(timeline[0].get("stage").unwrap(), "plan");
        assert!(norm.get("provider_calls").is_some());

        let view = t.replay_view();
        assert!(view.get("provider_calls").is_none());
        assert!(view.get("statements").is_some());
    }

    #[test]
    fn provenance_inverts_numbering() {
        let t = sample();
        let map = t.provenance();
        assert_eq!(map.get(&1).map(String::as_str), Some("doc:w128:t0"));
    }
}
