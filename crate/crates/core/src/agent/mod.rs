//! End-to-end case orchestration: plan tool calls from the patient case,
//! execute them, retrieve and number evidence, then generate the strategy,
//! the citation-bearing response, the citation self-check with a single
//! repair round, and follow-up suggestions. Every intermediate artifact is
//! recorded in a transcript.

mod replay;
mod transcript;

pub use replay::{replay_transcript, ReplayError, ReplayOutcome};
pub use transcript::{
    CitationVerdict, RunStatus, Statement, Strategy, SubqueryPassages, TimelineEntry, Transcript,
    Verdict, TRANSCRIPT_SCHEMA,
};

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Engine;
use crate::index::VectorIndex;
use crate::provider::{
    ChatProvider, ChatRequest, ProviderError, TEMPLATE_CITATION_CHECK, TEMPLATE_CITED_RESPONSE,
    TEMPLATE_PLAN_ACTIONS, TEMPLATE_STRATEGY, TEMPLATE_SUBQUERIES, TEMPLATE_SUGGESTIONS,
};
use crate::retrieval::{
    generate_subqueries, merge_and_dedup, run_retrieval, strip_list_marker, CompositeSource,
    PassageSource, QuestionContext, Reranker, RetrievalConfig,
};
use crate::tools::{
    execute_plan, parse_plan, validate_plan, ExecutorConfig, PlanCall, ToolCallStatus,
    ToolRegistry, ToolResult,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid case: {0}")]
    InvalidCase(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttachmentKind {
    CtImage,
    MriImage,
    HistologyFeatures,
    GenomicVariant,
}

impl AttachmentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttachmentKind::CtImage => "ct_image",
            AttachmentKind::MriImage => "mri_image",
            AttachmentKind::HistologyFeatures => "histology_features",
            AttachmentKind::GenomicVariant => "genomic_variant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attachment {
    pub kind: AttachmentKind,
    #[serde(rename = "ref")]
    pub reference: String,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientCase {
    pub case_id: String,
    pub context: String,
    pub question: String,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    /// Optional operator-supplied plan that bypasses plan generation but not
    /// plan validation; used to pin tool use for a case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_plan: Option<Vec<PlanCall>>,
}

impl PatientCase {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.case_id.trim().is_empty() {
            return Err(AgentError::InvalidCase("case_id is empty".into()));
        }
        if self.context.trim().is_empty() {
            return Err(AgentError::InvalidCase("context is empty".into()));
        }
        if self.question.trim().is_empty() {
            return Err(AgentError::InvalidCase("question is empty".into()));
        }
        for (i, att) in self.attachments.iter().enumerate() {
            if att.reference.trim().is_empty() {
                return Err(AgentError::InvalidCase(format!("attachment {i} has an empty ref")));
            }
        }
        Ok(())
    }
}

pub fn load_case(path: &Path) -> Result<PatientCase, AgentError> {
    let content = std::fs::read_to_string(path).map_err(|source| AgentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let case: PatientCase = serde_json::from_str(&content).map_err(|e| AgentError::Malformed {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    case.validate()?;
    Ok(case)
}

/// How the plan for an attempt comes to exist.
pub(crate) enum PlanPhase<'a> {
    Live {
        registry: &'a ToolRegistry,
        max_calls: usize,
        forced: Option<&'a [PlanCall]>,
    },
    Replay {
        plan: &'a [PlanCall],
        regenerate: bool,
    },
}

/// Whether tool calls are executed or taken verbatim from a prior run.
pub(crate) enum ToolPhase<'a> {
    Execute {
        registry: &'a ToolRegistry,
        config: ExecutorConfig,
    },
    Replay {
        results: &'a [ToolResult],
        refused: bool,
    },
}

/// Where per-subquery passages come from.
pub(crate) enum SourcePhase<'a> {
    Live {
        source: &'a dyn PassageSource,
        reranker: &'a Reranker,
    },
    Recorded {
        lists: &'a [SubqueryPassages],
    },
}

pub(crate) struct Attempt<'a> {
    pub case_id: &'a str,
    pub context: &'a str,
    pub question: &'a str,
    pub attachments: String,
    pub tools_json: String,
    pub provider: &'a dyn ChatProvider,
    pub model: &'a str,
    pub temperature: f32,
    pub retrieval: RetrievalConfig,
    pub attempt: usize,
    pub max_attempts: usize,
    pub plan: PlanPhase<'a>,
    pub tools: ToolPhase<'a>,
    pub sources: SourcePhase<'a>,
}

impl Attempt<'_> {
    fn complete(
        &self,
        template_id: &str,
        variables: BTreeMap<String, String>,
    ) -> Result<String, ProviderError> {
        self.provider.complete(&ChatRequest {
            template_id: template_id.to_string(),
            variables,
            temperature: self.temperature,
            model: self.model.to_string(),
            images: Vec::new(),
        })
    }
}

fn vars<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Runs a case with refusal retries: a refused attempt is retried up to the
/// attempt budget, anything else ends the run. The last transcript is always
/// returned, failed or not; stage failures are recorded in the transcript
/// rather than surfaced as errors.
pub fn run_case(case: &PatientCase, index: Arc<VectorIndex>, engine: &Engine) -> Transcript {
    let composite =
        CompositeSource::new(index, engine.store.clone(), engine.embedder.clone());
    let attachments = render_attachments(&case.attachments);
    let tools_json = render_tool_specs(&engine.registry);
    let max_attempts = engine.settings.max_attempts.max(1);

    let mut last = None;
    for attempt_no in 1..=max_attempts {
        let log_offset = engine.call_log.lock().unwrap().len();
        let attempt = Attempt {
            case_id: &case.case_id,
            context: &case.context,
            question: &case.question,
            attachments: attachments.clone(),
            tools_json: tools_json.clone(),
            provider: engine.provider.as_ref(),
            model: &engine.settings.model,
            temperature: engine.settings.temperature,
            retrieval: engine.retrieval.clone(),
            attempt: attempt_no,
            max_attempts,
            plan: PlanPhase::Live {
                registry: &engine.registry,
                max_calls: engine.exec.max_calls,
                forced: case.forced_plan.as_deref(),
            },
            tools: ToolPhase::Execute { registry: &engine.registry, config: engine.exec },
            sources: SourcePhase::Live { source: &composite, reranker: &engine.reranker },
        };
        let mut transcript = run_attempt(&attempt);
        transcript.provider_calls = engine.call_log.lock().unwrap()[log_offset..].to_vec();
        if transcript.status == RunStatus::Refused && attempt_no < max_attempts {
            log::warn!(
                "attempt {attempt_no}/{max_attempts} for case '{}' was refused, retrying",
                case.case_id
            );
            last = Some(transcript);
            continue;
        }
        return transcript;
    }
    last.expect("at least one attempt ran")
}

pub(crate) fn run_attempt(a: &Attempt) -> Transcript {
    let mut t =
        Transcript::new(a.case_id, a.question, a.retrieval.clone(), a.attempt, a.max_attempts);

    t.mark("plan");
    match &a.plan {
        PlanPhase::Live { registry, max_calls, forced } => match forced {
            Some(plan) => {
                t.plan = plan.to_vec();
                if let Err(e) = validate_plan(plan, registry, *max_calls) {
                    return t.fail(format!("plan invalid: {e}"));
                }
            }
            None => {
                let raw = match a.complete(
                    TEMPLATE_PLAN_ACTIONS,
                    plan_vars(a, *max_calls),
                ) {
                    Ok(raw) => raw,
                    Err(e) => return t.fail(format!("plan generation failed: {e}")),
                };
                match parse_plan(&raw) {
                    Ok(plan) => {
                        t.plan = plan;
                        if let Err(e) = validate_plan(&t.plan, registry, *max_calls) {
                            return t.fail(format!("plan invalid: {e}"));
                        }
                    }
                    Err(e) => t.warn(format!(
                        "plan output could not be parsed, proceeding without tools: {e}"
                    )),
                }
            }
        },
        PlanPhase::Replay { plan, regenerate } => {
            if *regenerate {
                // variable values are irrelevant under a scripted provider
                let raw = match a.complete(
                    TEMPLATE_PLAN_ACTIONS,
                    plan_vars(a, ExecutorConfig::default().max_calls),
                ) {
                    Ok(raw) => raw,
                    Err(e) => return t.fail(format!("plan generation failed: {e}")),
                };
                match parse_plan(&raw) {
                    Ok(parsed) => t.plan = parsed,
                    Err(e) => t.warn(format!(
                        "plan output could not be parsed, proceeding without tools: {e}"
                    )),
                }
            } else {
                t.plan = plan.to_vec();
            }
        }
    }

    t.mark("tools");
    let refused = match &a.tools {
        ToolPhase::Execute { registry, config } => match execute_plan(&t.plan, registry, config) {
            Ok(outcome) => {
                t.tool_results = outcome.results;
                outcome.refused
            }
            Err(e) => return t.fail(format!("plan invalid: {e}")),
        },
        ToolPhase::Replay { results, refused } => {
            t.tool_results = results.to_vec();
            *refused
        }
    };
    if refused {
        let message = t
            .tool_results
            .iter()
            .find(|r| r.status == ToolCallStatus::Refused)
            .map(|r| {
                format!("tool '{}' refused: {}", r.tool, r.error.as_deref().unwrap_or("no detail"))
            })
            .unwrap_or_else(|| "tool call refused".to_string());
        t.status = RunStatus::Refused;
        t.error = Some(message);
        t.mark("refused");
        return t;
    }
    let tool_summaries = render_tool_summaries(&t.tool_results);

    t.mark("subqueries");
    let request = ChatRequest {
        template_id: TEMPLATE_SUBQUERIES.to_string(),
        variables: vars([
            ("max_subqueries", a.retrieval.max_subqueries.to_string()),
            ("context", a.context.to_string()),
            ("question", a.question.to_string()),
            ("tool_summaries", tool_summaries.clone()),
        ]),
        temperature: a.temperature,
        model: a.model.to_string(),
        images: Vec::new(),
    };
    let subqueries = match generate_subqueries(a.provider, &request, a.question, &a.retrieval) {
        Ok(subqueries) => subqueries,
        Err(e) => return t.fail(format!("subquery generation failed: {e}")),
    };
    t.subqueries = subqueries.clone();

    t.mark("retrieval");
    let (question_context, per_subquery) = match &a.sources {
        SourcePhase::Live { source, reranker } => {
            match run_retrieval(*source, &subqueries, &a.retrieval, reranker) {
                Ok(pair) => pair,
                Err(e) => return t.fail(format!("retrieval failed: {e}")),
            }
        }
        SourcePhase::Recorded { lists } => {
            if lists.len() != subqueries.len() {
                return t.fail(format!(
                    "replay divergence: transcript recorded {} subqueries, regeneration produced {}",
                    lists.len(),
                    subqueries.len()
                ));
            }
            let mut per = Vec::with_capacity(lists.len());
            for (subquery, recorded) in subqueries.iter().zip(lists.iter()) {
                if recorded.subquery != subquery.text {
                    return t.fail(format!(
                        "replay divergence: recorded subquery '{}' but regenerated '{}'",
                        recorded.subquery, subquery.text
                    ));
                }
                per.push(recorded.passages.clone());
            }
            (merge_and_dedup(&per), per)
        }
    };
    t.per_subquery_passages = subqueries
        .iter()
        .zip(per_subquery.iter())
        .map(|(s, p)| SubqueryPassages { subquery: s.text.clone(), passages: p.clone() })
        .collect();
    t.sources = question_context.sources.clone();
    let sources_text = question_context.rendered();

    t.mark("strategy");
    let raw = match a.complete(
        TEMPLATE_STRATEGY,
        vars([
            ("context", a.context.to_string()),
            ("question", a.question.to_string()),
            ("tool_summaries", tool_summaries.clone()),
            ("sources", sources_text.clone()),
        ]),
    ) {
        Ok(raw) => raw,
        Err(e) => return t.fail(format!("strategy generation failed: {e}")),
    };
    let strategy = parse_strategy(&raw);
    let strategy_text = render_strategy(&strategy);
    t.strategy = Some(strategy);

    t.mark("cited_response");
    let gen = GenerationInputs {
        context: a.context,
        question: a.question,
        strategy: &strategy_text,
        tool_summaries: &tool_summaries,
        sources: &sources_text,
    };
    let raw = match a.complete(TEMPLATE_CITED_RESPONSE, gen.vars("")) {
        Ok(raw) => raw,
        Err(e) => return t.fail(format!("cited response generation failed: {e}")),
    };
    let statements = parse_cited_response(&raw);

    t.mark("self_check");
    let outcome = self_check(a, &gen, statements, &question_context);
    t.statements = outcome.statements;
    t.initial_verdicts = outcome.initial_verdicts;
    t.verdicts = outcome.verdicts;
    t.repaired = outcome.repaired;
    for warning in outcome.warnings {
        t.warn(warning);
    }

    t.mark("suggestions");
    match a.complete(
        TEMPLATE_SUGGESTIONS,
        vars([
            ("response", render_statements(&t.statements)),
            ("tools", a.tools_json.clone()),
            ("tool_summaries", tool_summaries.clone()),
        ]),
    ) {
        Ok(suggestions) => t.suggestions = suggestions,
        Err(_) => {
            t.suggestions = String::new();
            t.warn("suggestions generation failed, continuing without suggestions".to_string());
        }
    }

    t.final_text = compose_final(&t.statements, &t.suggestions);
    t.status = RunStatus::Ok;
    t.error = None;
    t.mark("done");
    t
}

fn plan_vars(a: &Attempt, max_calls: usize) -> BTreeMap<String, String> {
    vars([
        ("context", a.context.to_string()),
        ("question", a.question.to_string()),
        ("attachments", a.attachments.clone()),
        ("tools", a.tools_json.clone()),
        ("max_calls", max_calls.to_string()),
    ])
}

fn render_attachments(attachments: &[Attachment]) -> String {
    attachments
        .iter()
        .map(|att| {
            if att.label.is_empty() {
                format!("- {}: {}", att.kind.as_str(), att.reference)
            } else {
                format!("- {}: {} ({})", att.kind.as_str(), att.reference, att.label)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_tool_specs(registry: &ToolRegistry) -> String {
    serde_json::to_string_pretty(&registry.specs()).expect("tool specs serialize")
}

fn render_tool_summaries(results: &[ToolResult]) -> String {
    results
        .iter()
        .map(|r| match r.status {
            ToolCallStatus::Ok => {
                format!("- [{}] {}", r.call_id, r.summary.as_deref().unwrap_or("ok"))
            }
            ToolCallStatus::Error => format!(
                "- [{}] {} failed: {}",
                r.call_id,
                r.tool,
                r.error.as_deref().unwrap_or("unknown error")
            ),
            ToolCallStatus::Refused => format!(
                "- [{}] {} refused: {}",
                r.call_id,
                r.tool,
                r.error.as_deref().unwrap_or("no detail")
            ),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Lines become steps; lines with a "Missing:" prefix become the
/// missing-information list. An unparsable or empty output degrades to a
/// single direct-answer step so downstream stages always have a strategy.
fn parse_strategy(text: &str) -> Strategy {
    let mut steps = Vec::new();
    let mut missing = Vec::new();
    for line in text.lines() {
        let line = strip_list_marker(line.trim()).trim();
        if line.is_empty() {
            continue;
        }
        if line.to_lowercase().starts_with("missing:") {
            let content = line[line.find(':').expect("prefix has colon") + 1..].trim();
            if !content.is_empty() {
                missing.push(content.to_string());
            }
            continue;
        }
        steps.push(line.to_string());
    }
    if steps.is_empty() {
        steps.push("Answer the question directly from the available sources.".to_string());
    }
    Strategy { steps, missing_information: missing }
}

fn render_strategy(strategy: &Strategy) -> String {
    let mut lines: Vec<String> = strategy
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| format!("{}. {}", i + 1, step))
        .collect();
    for m in &strategy.missing_information {
        lines.push(format!("Missing: {m}"));
    }
    lines.join("\n")
}

static CITE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\[\s*[Ss]ource\s+\d+(?:\s*,\s*(?:[Ss]ource\s+)?\d+)*\s*\]").expect("valid regex")
});
static NUM_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").expect("valid regex"));

/// Splits on terminal punctuation followed by whitespace, so decimals like
/// 3.89 or inline ids never split a sentence.
fn split_sentences(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if matches!(bytes[i], b'.' | b'!' | b'?') {
            let mut j = i + 1;
            while j < bytes.len() && matches!(bytes[j], b'.' | b'!' | b'?') {
                j += 1;
            }
            if j >= bytes.len() || bytes[j].is_ascii_whitespace() {
                let sentence = text[start..j].trim();
                if !sentence.is_empty() {
                    sentences.push(sentence.to_string());
                }
                start = j;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

/// Parses generator output into statements with their bracketed source
/// numbers. A segment longer than two sentences is split so that no
/// statement exceeds two sentences; the bracket group stays attached to the
/// sentences immediately preceding it.
pub fn parse_cited_response(text: &str) -> Vec<Statement> {
    let mut statements: Vec<Statement> = Vec::new();
    let push_segment = |statements: &mut Vec<Statement>, segment: &str, citations: Vec<usize>| {
        let sentences = split_sentences(segment);
        // punctuation residue like the period after "[Source 1]." is not a
        // statement; a bracket group with no text of its own extends the
        // previous statement
        if !sentences.iter().any(|s| s.chars().any(char::is_alphanumeric)) {
            if let Some(prev) = statements.last_mut() {
                for c in citations {
                    if !prev.citations.contains(&c) {
                        prev.citations.push(c);
                    }
                }
            }
            return;
        }
        let chunks: Vec<&[String]> = sentences.chunks(2).collect();
        let last = chunks.len() - 1;
        for (i, chunk) in chunks.into_iter().enumerate() {
            let citations = if i == last { citations.clone() } else { Vec::new() };
            statements.push(Statement { text: chunk.join(" "), citations });
        }
    };

    let mut last_end = 0;
    for found in CITE_RE.find_iter(text) {
        let segment = &text[last_end..found.start()];
        let citations: Vec<usize> = NUM_RE
            .find_iter(found.as_str())
            .filter_map(|m| m.as_str().parse().ok())
            .collect();
        push_segment(&mut statements, segment, citations);
        last_end = found.end();
    }
    push_segment(&mut statements, &text[last_end..], Vec::new());
    statements
}

struct GenerationInputs<'a> {
    context: &'a str,
    question: &'a str,
    strategy: &'a str,
    tool_summaries: &'a str,
    sources: &'a str,
}

impl GenerationInputs<'_> {
    fn vars(&self, repair_instructions: &str) -> BTreeMap<String, String> {
        vars([
            ("context", self.context.to_string()),
            ("question", self.question.to_string()),
            ("strategy", self.strategy.to_string()),
            ("tool_summaries", self.tool_summaries.to_string()),
            ("sources", self.sources.to_string()),
            ("repair_instructions", repair_instructions.to_string()),
        ])
    }
}

struct SelfCheckOutcome {
    statements: Vec<Statement>,
    initial_verdicts: Vec<CitationVerdict>,
    verdicts: Vec<CitationVerdict>,
    repaired: bool,
    warnings: Vec<String>,
}

/// Checks every statement-citation pair against its cited passage, sends
/// unsupported or invalid pairs back to the generator exactly once, and
/// re-checks the revision. The second response is final regardless of its
/// verdicts; a checker failure leaves verdicts unchecked and skips repair.
fn self_check(
    a: &Attempt,
    gen: &GenerationInputs,
    statements: Vec<Statement>,
    context: &QuestionContext,
) -> SelfCheckOutcome {
    let mut warnings = Vec::new();
    let initial_verdicts = match check_pairs(a, &statements, context) {
        Ok(verdicts) => verdicts,
        Err(e) => {
            warnings.push("citation check failed, verdicts left unchecked".to_string());
            log::warn!("citation checker error: {e}");
            let verdicts = unchecked_verdicts(&statements, context);
            return SelfCheckOutcome {
                statements,
                initial_verdicts: verdicts.clone(),
                verdicts,
                repaired: false,
                warnings,
            };
        }
    };

    let needs_repair = initial_verdicts
        .iter()
        .any(|v| matches!(v.verdict, Verdict::Unsupported | Verdict::InvalidReference));
    if !needs_repair {
        return SelfCheckOutcome {
            statements,
            verdicts: initial_verdicts.clone(),
            initial_verdicts,
            repaired: false,
            warnings,
        };
    }

    let instructions = repair_instructions(&initial_verdicts, context.len());
    let raw = match a.complete(TEMPLATE_CITED_RESPONSE, gen.vars(&instructions)) {
        Ok(raw) => raw,
        Err(e) => {
            warnings.push("citation repair failed, keeping the original response".to_string());
            log::warn!("citation repair error: {e}");
            return SelfCheckOutcome {
                statements,
                verdicts: initial_verdicts.clone(),
                initial_verdicts,
                repaired: false,
                warnings,
            };
        }
    };
    let revised = parse_cited_response(&raw);
    let verdicts = match check_pairs(a, &revised, context) {
        Ok(verdicts) => verdicts,
        Err(e) => {
            warnings.push("citation re-check failed, verdicts left unchecked".to_string());
            log::warn!("citation checker error: {e}");
            unchecked_verdicts(&revised, context)
        }
    };
    SelfCheckOutcome { statements: revised, initial_verdicts, verdicts, repaired: true, warnings }
}

fn check_pairs(
    a: &Attempt,
    statements: &[Statement],
    context: &QuestionContext,
) -> Result<Vec<CitationVerdict>, ProviderError> {
    let mut verdicts = Vec::new();
    for (index, statement) in statements.iter().enumerate() {
        if statement.citations.is_empty() {
            verdicts.push(CitationVerdict {
                statement_index: index,
                citation: None,
                verdict: Verdict::Uncited,
            });
            continue;
        }
        for &citation in &statement.citations {
            let verdict = match context.get(citation) {
                None => Verdict::InvalidReference,
                Some(source) => {
                    let response = a.complete(
                        TEMPLATE_CITATION_CHECK,
                        vars([
                            ("statement", statement.text.clone()),
                            ("passage", source.text.clone()),
                        ]),
                    )?;
                    parse_check_verdict(&response)
                }
            };
            verdicts.push(CitationVerdict { statement_index: index, citation: Some(citation), verdict });
        }
    }
    Ok(verdicts)
}

fn parse_check_verdict(response: &str) -> Verdict {
    let normalized = response.trim().to_lowercase();
    if normalized.contains("unsupported") {
        Verdict::Unsupported
    } else if normalized.contains("supported") {
        Verdict::Supported
    } else {
        Verdict::Unchecked
    }
}

fn unchecked_verdicts(statements: &[Statement], context: &QuestionContext) -> Vec<CitationVerdict> {
    let mut verdicts = Vec::new();
    for (index, statement) in statements.iter().enumerate() {
        if statement.citations.is_empty() {
            verdicts.push(CitationVerdict {
                statement_index: index,
                citation: None,
                verdict: Verdict::Uncited,
            });
            continue;
        }
        for &citation in &statement.citations {
            let verdict = if context.get(citation).is_none() {
                Verdict::InvalidReference
            } else {
                Verdict::Unchecked
            };
            verdicts.push(CitationVerdict { statement_index: index, citation: Some(citation), verdict });
        }
    }
    verdicts
}

fn repair_instructions(verdicts: &[CitationVerdict], source_count: usize) -> String {
    verdicts
        .iter()
        .filter_map(|v| match (v.verdict, v.citation) {
            (Verdict::Unsupported, Some(c)) => Some(format!(
                "Statement {} cites Source {c}, but that passage does not support it. \
                 Revise the statement or cite a source that does.",
                v.statement_index + 1
            )),
            (Verdict::InvalidReference, Some(c)) => Some(format!(
                "Statement {} cites Source {c}, which does not exist. \
                 Only Sources 1 through {source_count} are available.",
                v.statement_index + 1
            )),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_statements(statements: &[Statement]) -> String {
    statements
        .iter()
        .map(|s| {
            if s.citations.is_empty() {
                s.text.clone()
            } else {
                let refs =
                    s.citations.iter().map(|n| format!("Source {n}")).collect::<Vec<_>>().join(", ");
                format!("{} [{}]", s.text, refs)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn compose_final(statements: &[Statement], suggestions: &str) -> String {
    let body = render_statements(statements);
    if suggestions.trim().is_empty() {
        body
    } else if body.is_empty() {
        suggestions.to_string()
    } else {
        format!("{body}\n\n{suggestions}")
    }
}
