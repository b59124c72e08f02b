//! Multi-rater evaluation: majority vote with adverse tie-breaking over
//! per-item labels, aggregated into tool-use, completeness, helpfulness,
//! statement-quality, and citation-alignment ratios with exact one-decimal
//! percentage rendering.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::percent_one_decimal;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("label {0} is not in the hierarchy")]
    UnknownLabel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inconsistent annotations for case '{case}': {message}")]
    Integrity { case: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatementLabel {
    Correct,
    Wrong,
    Harmful,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CitationLabel {
    Correct,
    Irrelevant,
    Wrong,
}

/// Best-to-worst orders used for adverse tie-breaking.
pub const STATEMENT_HIERARCHY: [StatementLabel; 3] =
    [StatementLabel::Correct, StatementLabel::Wrong, StatementLabel::Harmful];
pub const CITATION_HIERARCHY: [CitationLabel; 3] =
    [CitationLabel::Correct, CitationLabel::Irrelevant, CitationLabel::Wrong];
pub const ANSWERED_HIERARCHY: [bool; 2] = [true, false];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolExpectation {
    pub tool: String,
    pub expected_count: usize,
    pub actual_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpfulnessLabel {
    pub subquestion: String,
    pub answered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordCoverage {
    pub keyword: String,
    pub covered: bool,
}

/// One clinician's annotation of one case. `citations_provided` counts every
/// citation the response contained; `citation_labels` covers the subset the
/// raters adjudicated, so the two may differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaterAnnotation {
    pub rater_id: String,
    pub case_id: String,
    #[serde(default)]
    pub tool_expectations: Vec<ToolExpectation>,
    #[serde(default)]
    pub statement_labels: Vec<StatementLabel>,
    #[serde(default)]
    pub citation_labels: Vec<CitationLabel>,
    #[serde(default)]
    pub citations_provided: Option<usize>,
    #[serde(default)]
    pub helpfulness_labels: Vec<HelpfulnessLabel>,
    #[serde(default)]
    pub completeness_keywords: Vec<KeywordCoverage>,
}

impl RaterAnnotation {
    fn citations_provided(&self) -> usize {
        self.citations_provided.unwrap_or(self.citation_labels.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
    pub percent: String,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Self { numerator, denominator, percent: percent_one_decimal(numerator, denominator) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementMetrics {
    pub total: u64,
    pub correct: Ratio,
    pub wrong: Ratio,
    pub harmful: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationMetrics {
    /// Citations the responses contained (the ratio denominator).
    pub provided: u64,
    /// Citations the raters adjudicated; label counts sum to this.
    pub labeled: u64,
    pub correct: Ratio,
    pub irrelevant: Ratio,
    pub wrong: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub tool_use: Ratio,
    pub completeness: Ratio,
    pub helpfulness: Ratio,
    pub statements: StatementMetrics,
    pub citations: CitationMetrics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cases: usize,
    pub raters: usize,
    pub tool_use: Ratio,
    pub completeness: Ratio,
    pub helpfulness: Ratio,
    pub statements: StatementMetrics,
    pub citations: CitationMetrics,
    pub per_case: Vec<CaseMetrics>,
}

/// Plurality vote over labels drawn from `hierarchy` (ordered best to
/// worst). Any tie among the top counts resolves to the most adverse tied
/// label, so a 2-2 split never flatters the result.
pub fn majority_vote<L>(labels: &[L], hierarchy: &[L]) -> Result<L, EvalError>
where
    L: Copy + PartialEq + Debug,
{
    if labels.is_empty() {
        return Err(EvalError::InvalidArgument("no labels to vote on".into()));
    }
    if hierarchy.is_empty() {
        return Err(EvalError::InvalidArgument("empty hierarchy".into()));
    }
    let mut counts = vec![0usize; hierarchy.len()];
    for label in labels {
        let position = hierarchy
            .iter()
            .position(|h| h == label)
            .ok_or_else(|| EvalError::UnknownLabel(format!("{label:?}")))?;
        counts[position] += 1;
    }
    let top = *counts.iter().max().expect("hierarchy non-empty");
    let winner = counts.iter().rposition(|&c| c == top).expect("some label counted");
    Ok(hierarchy[winner])
}

fn transpose_vote<L>(
    case: &str,
    what: &str,
    raters: &[&RaterAnnotation],
    extract: impl Fn(&RaterAnnotation) -> Vec<L>,
    hierarchy: &[L],
) -> Result<Vec<L>, EvalError>
where
    L: Copy + PartialEq + Debug,
{
    let per_rater: Vec<Vec<L>> = raters.iter().map(|r| extract(r)).collect();
    let expected = per_rater[0].len();
    for (rater, labels) in raters.iter().zip(per_rater.iter()) {
        if labels.len() != expected {
            return Err(EvalError::Integrity {
                case: case.to_string(),
                message: format!(
                    "rater '{}' has {} {what} labels, others have {expected}",
                    rater.rater_id,
                    labels.len()
                ),
            });
        }
    }
    (0..expected)
        .map(|item| {
            let votes: Vec<L> = per_rater.iter().map(|labels| labels[item]).collect();
            majority_vote(&votes, hierarchy).map_err(|e| match e {
                EvalError::UnknownLabel(label) => EvalError::Integrity {
                    case: case.to_string(),
                    message: format!("{what} item {item} carries unknown label {label}"),
                },
                other => other,
            })
        })
        .collect()
}

fn check_tool_rows(case: &str, raters: &[&RaterAnnotation]) -> Result<Vec<ToolExpectation>, EvalError> {
    let reference = &raters[0].tool_expectations;
    for rater in &raters[1..] {
        if rater.tool_expectations.len() != reference.len() {
            return Err(EvalError::Integrity {
                case: case.to_string(),
                message: format!(
                    "rater '{}' lists {} tool rows, rater '{}' lists {}",
                    rater.rater_id,
                    rater.tool_expectations.len(),
                    raters[0].rater_id,
                    reference.len()
                ),
            });
        }
        for (index, (a, b)) in reference.iter().zip(rater.tool_expectations.iter()).enumerate() {
            if a != b {
                return Err(EvalError::Integrity {
                    case: case.to_string(),
                    message: format!(
                        "tool row {index} differs between rater '{}' and rater '{}'",
                        raters[0].rater_id, rater.rater_id
                    ),
                });
            }
        }
    }
    Ok(reference.clone())
}

/// Majority labels are computed per item first, then aggregated over all
/// cases. Tool counts and the provided-citation total are objective records
/// and must match across raters exactly.
pub fn compute_metrics(annotations: &[RaterAnnotation]) -> Result<MetricsReport, EvalError> {
    if annotations.is_empty() {
        return Err(EvalError::InvalidArgument("no annotations given".into()));
    }

    let mut by_case: BTreeMap<&str, Vec<&RaterAnnotation>> = BTreeMap::new();
    for annotation in annotations {
        by_case.entry(&annotation.case_id).or_default().push(annotation);
    }
    let mut rater_ids: Vec<&str> = annotations.iter().map(|a| a.rater_id.as_str()).collect();
    rater_ids.sort_unstable();
    rater_ids.dedup();

    let mut per_case = Vec::new();
    let mut tool_expected = 0u64;
    let mut tool_used = 0u64;
    let mut keywords_total = 0u64;
    let mut keywords_covered = 0u64;
    let mut subquestions_total = 0u64;
    let mut subquestions_answered = 0u64;
    let mut statement_total = 0u64;
    let mut statement_counts = [0u64; 3];
    let mut citations_provided_total = 0u64;
    let mut citations_labeled_total = 0u64;
    let mut citation_counts = [0u64; 3];

    for (case_id, mut raters) in by_case {
        raters.sort_by(|a, b| a.rater_id.cmp(&b.rater_id));
        for pair in raters.windows(2) {
            if pair[0].rater_id == pair[1].rater_id {
                return Err(EvalError::Integrity {
                    case: case_id.to_string(),
                    message: format!("duplicate annotation from rater '{}'", pair[0].rater_id),
                });
            }
        }

        let tool_rows = check_tool_rows(case_id, &raters)?;
        let provided = raters[0].citations_provided();
        for rater in &raters {
            if rater.citations_provided() != provided {
                return Err(EvalError::Integrity {
                    case: case_id.to_string(),
                    message: format!(
                        "rater '{}' records {} provided citations, rater '{}' records {provided}",
                        rater.rater_id,
                        rater.citations_provided(),
                        raters[0].rater_id
                    ),
                });
            }
            if rater.citation_labels.len() > provided {
                return Err(EvalError::Integrity {
                    case: case_id.to_string(),
                    message: format!(
                        "rater '{}' labels {} citations but only {provided} were provided",
                        rater.rater_id,
                        rater.citation_labels.len()
                    ),
                });
            }
        }

        let statement_majority = transpose_vote(
            case_id,
            "statement",
            &raters,
            |r| r.statement_labels.clone(),
            &STATEMENT_HIERARCHY,
        )?;
        let citation_majority = transpose_vote(
            case_id,
            "citation",
            &raters,
            |r| r.citation_labels.clone(),
            &CITATION_HIERARCHY,
        )?;
        let answered_majority = transpose_vote(
            case_id,
            "helpfulness",
            &raters,
            |r| r.helpfulness_labels.iter().map(|l| l.answered).collect(),
            &ANSWERED_HIERARCHY,
        )?;
        let covered_majority = transpose_vote(
            case_id,
            "completeness",
            &raters,
            |r| r.completeness_keywords.iter().map(|k| k.covered).collect(),
            &ANSWERED_HIERARCHY,
        )?;

        let case_tool_expected: u64 = tool_rows.iter().map(|r| r.expected_count as u64).sum();
        let case_tool_used: u64 =
            tool_rows.iter().map(|r| r.expected_count.min(r.actual_count) as u64).sum();
        let case_statements = count_labels(&statement_majority, &STATEMENT_HIERARCHY);
        let case_citations = count_labels(&citation_majority, &CITATION_HIERARCHY);
        let case_answered = answered_majority.iter().filter(|&&a| a).count() as u64;
        let case_covered = covered_majority.iter().filter(|&&c| c).count() as u64;

        tool_expected += case_tool_expected;
        tool_used += case_tool_used;
        subquestions_total += answered_majority.len() as u64;
        subquestions_answered += case_answered;
        keywords_total += covered_majority.len() as u64;
        keywords_covered += case_covered;
        statement_total += statement_majority.len() as u64;
        for (i, c) in case_statements.iter().enumerate() {
            statement_counts[i] += c;
        }
        citations_provided_total += provided as u64;
        citations_labeled_total += citation_majority.len() as u64;
        for (i, c) in case_citations.iter().enumerate() {
            citation_counts[i] += c;
        }

        per_case.push(CaseMetrics {
            case_id: case_id.to_string(),
            tool_use: Ratio::new(case_tool_used, case_tool_expected),
            completeness: Ratio::new(case_covered, covered_majority.len() as u64),
            helpfulness: Ratio::new(case_answered, answered_majority.len() as u64),
            statements: statement_metrics(&case_statements, statement_majority.len() as u64),
            citations: citation_metrics(&case_citations, citation_majority.len() as u64, provided as u64),
        });
    }

    Ok(MetricsReport {
        cases: per_case.len(),
        raters: rater_ids.len(),
        tool_use: Ratio::new(tool_used, tool_expected),
        completeness: Ratio::new(keywords_covered, keywords_total),
        helpfulness: Ratio::new(subquestions_answered, subquestions_total),
        statements: statement_metrics(&statement_counts, statement_total),
        citations: citation_metrics(&citation_counts, citations_labeled_total, citations_provided_total),
        per_case,
    })
}

fn count_labels<L: PartialEq>(labels: &[L], hierarchy: &[L; 3]) -> [u64; 3] {
    let mut counts = [0u64; 3];
    for label in labels {
        let position = hierarchy.iter().position(|h| h == label).expect("label voted from hierarchy");
        counts[position] += 1;
    }
    counts
}

fn statement_metrics(counts: &[u64; 3], total: u64) -> StatementMetrics {
    StatementMetrics {
        total,
        correct: Ratio::new(counts[0], total),
        wrong: Ratio::new(counts[1], total),
        harmful: Ratio::new(counts[2], total),
    }
}

fn citation_metrics(counts: &[u64; 3], labeled: u64, provided: u64) -> CitationMetrics {
    CitationMetrics {
        provided,
        labeled,
        correct: Ratio::new(counts[0], provided),
        irrelevant: Ratio::new(counts[1], provided),
        wrong: Ratio::new(counts[2], provided),
    }
}

/// A keyword with optional synonyms; any case-insensitive containment counts
/// as coverage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordSpec {
    pub keyword: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

pub fn completeness_check(response_text: &str, keywords: &[KeywordSpec]) -> Vec<KeywordCoverage> {
    let haystack = response_text.to_lowercase();
    keywords
        .iter()
        .map(|spec| {
            let covered = std::iter::once(&spec.keyword)
                .chain(spec.synonyms.iter())
                .any(|needle| !needle.is_empty() && haystack.contains(&needle.to_lowercase()));
            KeywordCoverage { keyword: spec.keyword.clone(), covered }
        })
        .collect()
}

/// Loads every `*.json` annotation in the directory, sorted by file name so
/// results never depend on directory iteration order.
pub fn load_annotations(dir: &Path) -> Result<Vec<RaterAnnotation>, EvalError> {
    let entries = std::fs::read_dir(dir).map_err(|source| EvalError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    let mut annotations = Vec::with_capacity(paths.len());
    for path in paths {
        let content = std::fs::read_to_string(&path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let annotation: RaterAnnotation =
            serde_json::from_str(&content).map_err(|e| EvalError::Malformed {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        annotations.push(annotation);
    }
    Ok(annotations)
}

pub fn render_text_table(report: &MetricsReport) -> String {
    let mut lines = Vec::new();
    lines.push(format!("cases: {}    raters: {}", report.cases, report.raters));
    lines.push(String::new());
    let row = |name: &str, r: &Ratio| {
        format!("{name:<22} {:>5}/{:<5} {:>6}%", r.numerator, r.denominator, r.percent)
    };
    lines.push(row("tool use", &report.tool_use));
    lines.push(row("completeness", &report.completeness));
    lines.push(row("helpfulness", &report.helpfulness));
    lines.push(row("statements correct", &report.statements.correct));
    lines.push(row("statements wrong", &report.statements.wrong));
    lines.push(row("statements harmful", &report.statements.harmful));
    lines.push(row("citations correct", &report.citations.correct));
    lines.push(row("citations irrelevant", &report.citations.irrelevant));
    lines.push(row("citations wrong", &report.citations.wrong));
    lines.push(format!(
        "citations labeled      {:>5}/{:<5}",
        report.citations.labeled, report.citations.provided
    ));
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
