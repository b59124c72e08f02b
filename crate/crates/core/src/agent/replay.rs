//! Replays a recorded run: the provider script is rebuilt from the recorded
//! calls, tool results and retrieved passages are fed back verbatim, the
//! generation stages run again, and the regenerated transcript is compared
//! with the original (timestamps and the provider call log excluded, since
//! tools, and therefore the vision calls made inside them, never re-run).

use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::provider::{LoggingProvider, ScriptedProvider, TEMPLATE_PLAN_ACTIONS};

use super::transcript::{RunStatus, Transcript};
use super::{run_attempt, Attempt, PlanPhase, SourcePhase, ToolPhase};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("transcript cannot be replayed: {0}")]
    Unsupported(String),
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub transcript: Transcript,
    pub matches: bool,
    /// Top-level transcript fields that differ, empty when `matches`.
    pub differences: Vec<String>,
}

pub fn replay_transcript(original: &Transcript) -> Result<ReplayOutcome, ReplayError> {
    if original.status == RunStatus::Error {
        return Err(ReplayError::Unsupported(
            "an error-status transcript records a partial run; only completed or refused runs \
             can be replayed"
                .into(),
        ));
    }

    let scripted = ScriptedProvider::new();
    for record in &original.provider_calls {
        scripted.push(&record.template_id, record.response.clone());
    }
    let call_log = Arc::new(Mutex::new(Vec::new()));
    let provider = LoggingProvider::new(Arc::new(scripted), call_log.clone());

    let (model, temperature) = original
        .provider_calls
        .first()
        .map(|r| (r.model.clone(), r.temperature))
        .unwrap_or_else(|| ("gpt-4-0125-preview".to_string(), 0.1));
    // a forced plan produces no plan generation record; take the plan verbatim then
    let regenerate_plan =
        original.provider_calls.iter().any(|r| r.template_id == TEMPLATE_PLAN_ACTIONS);

    let attempt = Attempt {
        case_id: &original.case_id,
        context: "",
        question: &original.question,
        attachments: String::new(),
        tools_json: String::new(),
        provider: &provider,
        model: &model,
        temperature,
        retrieval: original.retrieval.clone(),
        attempt: original.attempt,
        max_attempts: original.max_attempts,
        plan: PlanPhase::Replay { plan: &original.plan, regenerate: regenerate_plan },
        tools: ToolPhase::Replay {
            results: &original.tool_results,
            refused: original.status == RunStatus::Refused,
        },
        sources: SourcePhase::Recorded { lists: &original.per_subquery_passages },
    };
    let mut transcript = run_attempt(&attempt);
    transcript.provider_calls = call_log.lock().unwrap().clone();

    let (matches, differences) = compare(original, &transcript);
    Ok(ReplayOutcome { transcript, matches, differences })
}

fn compare(original: &Transcript, replayed: &Transcript) -> (bool, Vec<String>) {
    let a = original.replay_view();
    let b = replayed.replay_view();
    if a == b {
        return (true, Vec::new());
    }
    let mut differences = Vec::new();
    if let (Some(ao), Some(bo)) = (a.as_object(), b.as_object()) {
        for (key, value) in ao {
            if bo.get(key) != Some(value) {
                differences.push(key.clone());
            }
        }
        for key in bo.keys() {
            if !ao.contains_key(key) {
                differences.push(key.clone());
            }
        }
    }
    (false, differences)
}
