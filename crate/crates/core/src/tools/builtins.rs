//! Built-in tools: deterministic mocks for offline runs plus thin HTTP
//! adapters for the corresponding live services.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Map as JsonMap, Number, Value};

use super::{required_str, Tool, ToolError, ToolOutput, ToolSpec};
use crate::corpus::{clean_text, CuratedDocument, DocMetadata, SourceKind};
use crate::index::{EmbeddingProvider, VectorIndex};
use crate::provider::{
    ChatProvider, ChatRequest, TEMPLATE_VISION_COMPARE, TEMPLATE_VISION_REPORT,
};
use crate::retrieval::EphemeralStore;
use crate::transport::Transport;

const PUBMED_WINDOWS: &[usize] = &[128];
const PUBMED_OVERLAP: usize = 50;

fn required_f64(args: &JsonMap<String, Value>, tool: &str, key: &str) -> Result<f64, ToolError> {
    args.get(key).and_then(Value::as_f64).ok_or_else(|| ToolError::InvalidArguments {
        tool: tool.to_string(),
        message: format!("missing numeric argument '{key}'"),
    })
}

fn resolve_ref(base: &Path, arg: impl AsRef<Path>) -> PathBuf {
    let p = arg.as_ref();
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn bearer_headers(api_key_env: Option<&str>) -> Result<Vec<(String, String)>, ToolError> {
    match api_key_env {
        None => Ok(Vec::new()),
        Some(var) => {
            let key = std::env::var(var).map_err(|_| ToolError::Failed {
                tool: "remote".to_string(),
                message: format!("environment variable {var} is not set"),
            })?;
            Ok(vec![("Authorization".to_string(), format!("Bearer {key}"))])
        }
    }
}

pub fn calculator_spec() -> ToolSpec {
    ToolSpec::new(
        "calculator",
        "Performs one arithmetic operation on two numbers.",
        &[
            ("op", "string", "operation: add, sub, mul, or div", true),
            ("a", "number", "left operand", true),
            ("b", "number", "right operand", true),
        ],
    )
}

pub struct Calculator;

impl Tool for Calculator {
    fn spec(&self) -> ToolSpec {
        calculator_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let op = required_str(args, "calculator", "op")?;
        let a = required_f64(args, "calculator", "a")?;
        let b = required_f64(args, "calculator", "b")?;
        let value = match op {
            "add" => a + b,
            "sub" => a - b,
            "mul" => a * b,
            "div" => {
                if b == 0.0 {
                    return Err(ToolError::Failed {
                        tool: "calculator".to_string(),
                        message: "division by zero".to_string(),
                    });
                }
                a / b
            }
            other => {
                return Err(ToolError::InvalidArguments {
                    tool: "calculator".to_string(),
                    message: format!("unknown op '{other}'"),
                })
            }
        };
        let number = Number::from_f64(value).ok_or_else(|| ToolError::Failed {
            tool: "calculator".to_string(),
            message: "result is not a finite number".to_string(),
        })?;
        Ok(ToolOutput {
            output: json!({ "value": number }),
            summary: format!("calculator: {op}({a}, {b}) = {value}"),
        })
    }
}

pub fn web_search_spec() -> ToolSpec {
    ToolSpec::new(
        "web_search",
        "Searches the web and returns pages with extracted text.",
        &[("query", "string", "search query", true)],
    )
}

#[derive(Debug, Clone)]
struct WebPage {
    title: String,
    url: String,
    extracted_text: String,
}

/// Fixture-backed search. Unknown queries return zero results; extracted
/// text is run through the corpus cleaning pass.
pub struct MockWebSearch {
    fixtures: BTreeMap<String, Vec<WebPage>>,
    cap: usize,
}

impl MockWebSearch {
    pub fn with_default_fixtures() -> Self {
        let mut fixtures = BTreeMap::new();
        fixtures.insert(
            "braf inhibitor".to_string(),
            vec![
                WebPage {
                    title: "BRAF inhibitors in metastatic colorectal cancer".to_string(),
                    url: "https://example.org/web/braf-inhibitors".to_string(),
                    extracted_text: "BRAF inhibitor monotherapy shows limited activity in \
                                     colorectal cancer because of feedback EGFR activation; \
                                     combination strategies with EGFR blockade are preferred."
                        .to_string(),
                },
                WebPage {
                    title: "Targeted therapy for BRAF V600E tumors".to_string(),
                    url: "https://example.org/web/v600e-targeted".to_string(),
                    extracted_text: "Across tumor types, BRAF V600E signals sensitivity to RAF \
                                     and MEK directed regimens, with tissue specific resistance \
                                     patterns in the colon."
                        .to_string(),
                },
            ],
        );
        fixtures.insert(
            "braf v600e colorectal cancer treatment".to_string(),
            vec![
                WebPage {
                    title: "Guideline update for BRAF V600E metastatic colorectal cancer"
                        .to_string(),
                    url: "https://example.org/web/guideline-braf".to_string(),
                    extracted_text: "Current guidelines recommend encorafenib plus cetuximab \
                                     for previously treated BRAF V600E metastatic colorectal \
                                     cancer, with doublet or triplet chemotherapy remaining an \
                                     option in the first line."
                        .to_string(),
                },
                WebPage {
                    title: "Testing and treatment pathways for BRAF mutated colorectal cancer"
                        .to_string(),
                    url: "https://example.org/web/testing-pathways".to_string(),
                    extracted_text: "Molecular testing for BRAF V600E should be performed at \
                                     diagnosis of metastatic disease; results guide selection \
                                     of targeted therapy and inform prognosis."
                        .to_string(),
                },
            ],
        );
        fixtures.insert(
            "ros1 fusion targeted therapy".to_string(),
            vec![WebPage {
                title: "ROS1 fusions and targeted therapy".to_string(),
                url: "https://example.org/web/ros1".to_string(),
                extracted_text: "Crizotinib and entrectinib are established options for ROS1 \
                                 fusion positive tumors, with durable responses reported \
                                 across histologies."
                    .to_string(),
            }],
        );
        Self { fixtures, cap: 5 }
    }

    #[cfg(test)]
    fn with_fixture(query: &str, pages: Vec<(String, String, String)>) -> Self {
        let mut fixtures = BTreeMap::new();
        fixtures.insert(
            query.to_lowercase(),
            pages
                .into_iter()
                .map(|(title, url, extracted_text)| WebPage { title, url, extracted_text })
                .collect(),
        );
        Self { fixtures, cap: 5 }
    }
}

impl Tool for MockWebSearch {
    fn spec(&self) -> ToolSpec {
        web_search_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let query = required_str(args, "web_search", "query")?;
        let mut pages = self
            .fixtures
            .get(&query.trim().to_lowercase())
            .cloned()
            .unwrap_or_default();
        pages.truncate(self.cap);
        let results: Vec<Value> = pages
            .iter()
            .map(|p| {
                json!({
                    "title": p.title,
                    "url": p.url,
                    "extracted_text": clean_text(&p.extracted_text),
                })
            })
            .collect();
        Ok(ToolOutput {
            output: json!({ "results": results }),
            summary: format!("web_search: {} result(s) for '{query}'", results.len()),
        })
    }
}

/// HTTP adapter for a search service that answers
/// {query, max_results} -> {results: [{title, url, extracted_text}]}.
pub struct RemoteWebSearch {
    transport: Arc<dyn Transport>,
    endpoint: String,
    api_key_env: Option<String>,
    cap: usize,
}

impl RemoteWebSearch {
    pub fn new(transport: Arc<dyn Transport>, endpoint: String, api_key_env: Option<String>) -> Self {
        Self { transport, endpoint, api_key_env, cap: 5 }
    }
}

impl Tool for RemoteWebSearch {
    fn spec(&self) -> ToolSpec {
        web_search_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let query = required_str(args, "web_search", "query")?;
        let headers = bearer_headers(self.api_key_env.as_deref())?;
        let body = json!({ "query": query, "max_results": self.cap });
        let response = self
            .transport
            .post_json(&self.endpoint, &headers, &body)
            .map_err(|e| ToolError::Failed { tool: "web_search".to_string(), message: e.to_string() })?;
        let mut results = response
            .get("results")
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();
        results.truncate(self.cap);
        for item in &mut results {
            if let Some(text) = item.get("extracted_text").and_then(Value::as_str) {
                let cleaned = clean_text(text);
                item["extracted_text"] = Value::String(cleaned);
            }
        }
        Ok(ToolOutput {
            output: json!({ "results": results }),
            summary: format!("web_search: {} result(s) for '{query}'", results.len()),
        })
    }
}

pub fn pubmed_search_spec() -> ToolSpec {
    ToolSpec::new(
        "pubmed_search",
        "Searches the biomedical literature and indexes the abstracts for retrieval.",
        &[("query", "string", "literature query", true)],
    )
}

#[derive(Debug, Clone)]
struct PubmedRecord {
    pmid: String,
    title: String,
    abstract_text: String,
}

fn index_abstracts(
    store: &EphemeralStore,
    embedder: &Arc<dyn EmbeddingProvider>,
    query: &str,
    records: &[PubmedRecord],
) -> Result<(usize, String), ToolError> {
    let docs: Vec<CuratedDocument> = records
        .iter()
        .map(|r| CuratedDocument {
            id: format!("pubmed-{}", r.pmid),
            metadata: DocMetadata {
                source: SourceKind::Custom,
                title: r.title.clone(),
                authors: Vec::new(),
                published: None,
                url: None,
            },
            text: format!("{}\n{}", r.title, r.abstract_text),
        })
        .collect();
    let index = VectorIndex::build(&docs, PUBMED_WINDOWS, PUBMED_OVERLAP, embedder.as_ref())
        .map_err(|e| ToolError::Failed { tool: "pubmed_search".to_string(), message: e.to_string() })?;
    let chunks = index.len();
    let key = format!("pubmed:{query}");
    store.insert(key.clone(), index);
    Ok((chunks, key))
}

fn pubmed_output(query: &str, records: &[PubmedRecord], chunks: usize, key: &str) -> ToolOutput {
    let results: Vec<Value> =
        records.iter().map(|r| json!({ "pmid": r.pmid, "title": r.title })).collect();
    ToolOutput {
        output: json!({
            "query": query,
            "count": records.len(),
            "results": results,
            "indexed_chunks": chunks,
            "index_key": key,
        }),
        summary: format!("pubmed_search: {} abstract(s) for '{query}'", records.len()),
    }
}

/// Fixture-backed literature search. Every invocation creates a per-case
/// index (possibly empty) alongside the main corpus index.
pub struct MockPubmedSearch {
    fixtures: BTreeMap<String, Vec<PubmedRecord>>,
    store: Arc<EphemeralStore>,
    embedder: Arc<dyn EmbeddingProvider>,
}

impl MockPubmedSearch {
    pub fn with_default_fixtures(
        store: Arc<EphemeralStore>,
        embedder: Arc<dyn EmbeddingProvider>,
    ) -> Self {
        let mut fixtures = BTreeMap::new();
        fixtures.insert(
            "braf v600e metastatic colorectal cancer".to_string(),
            vec![
                PubmedRecord {
                    pmid: "31566309".to_string(),
                    title: "Encorafenib plus cetuximab in BRAF V600E mutated metastatic \
                            colorectal cancer"
                        .to_string(),
                    abstract_text: "In patients with BRAF V600E mutated metastatic colorectal \
                                    cancer, combined BRAF and EGFR inhibition with encorafenib \
                                    plus cetuximab improved overall survival and objective \
                                    response compared with standard chemotherapy."
                        .to_string(),
                },
                PubmedRecord {
                    pmid: "30982687".to_string(),
                    title: "Biology and treatment resistance of BRAF V600E colorectal cancer"
                        .to_string(),
                    abstract_text: "BRAF V600E colorectal cancers show distinct biology with \
                                    right sided predominance, microsatellite instability \
                                    overlap, and poor prognosis under conventional regimens."
                        .to_string(),
                },
                PubmedRecord {
                    pmid: "26287849".to_string(),
                    title: "Feedback reactivation of EGFR limits single agent BRAF inhibition \
                            in colorectal tumors"
                        .to_string(),
                    abstract_text: "Unlike melanoma, colorectal tumors bypass single agent BRAF \
                                    blockade through rapid feedback activation of EGFR, \
                                    motivating combination regimens that pair RAF inhibitors \
                                    with EGFR antibodies."
                        .to_string(),
                },
            ],
        );
        fixtures.insert(
            "ros1 fusion crizotinib".to_string(),
            vec![
                PubmedRecord {
                    pmid: "24724913".to_string(),
                    title: "Crizotinib in ROS1 rearranged cancers".to_string(),
                    abstract_text: "ROS1 rearrangement defines a molecular subgroup with marked \
                                    and durable responses to crizotinib across tumor types."
                        .to_string(),
                },
                PubmedRecord {
                    pmid: "28183697".to_string(),
                    title: "Entrectinib in ROS1 fusion positive tumors".to_string(),
                    abstract_text: "Entrectinib achieved high response rates in ROS1 fusion \
                                    positive disease, including durable intracranial activity."
                        .to_string(),
                },
            ],
        );
        Self { fixtures, store, embedder }
    }
}

impl Tool for MockPubmedSearch {
    fn spec(&self) -> ToolSpec {
        pubmed_search_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let query = required_str(args, "pubmed_search", "query")?;
        let records = self
            .fixtures
            .get(&query.trim().to_lowercase())
            .cloned()
            .unwrap_or_default();
        let (chunks, key) = index_abstracts(&self.store, &self.embedder, query, &records)?;
        Ok(pubmed_output(query, &records, chunks, &key))
    }
}

/// HTTP adapter for a literature service that answers
/// {query} -> {results: [{pmid, title, abstract}]}. Abstracts are indexed
/// exactly like the mock's.
pub struct RemotePubmedSearch {
    transport: Arc<dyn Transport>,
    endpoint: String,
    api_key_env: Option<String>,
    store: Arc<EphemeralStore>,
    embedder: Arc<dyn EmbeddingProvider>,
}

impl RemotePubmedSearch {
    pub fn new(
        transport: Arc<dyn Transport>,
        endpoint: String,
        api_key_env: Option<String>,
        store: Arc<EphemeralStore>,
        embedder: Arc<dyn EmbeddingProvider>,
    ) -> Self {
        Self { transport, endpoint, api_key_env, store, embedder }
    }
}

impl Tool for RemotePubmedSearch {
    fn spec(&self) -> ToolSpec {
        pubmed_search_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let query = required_str(args, "pubmed_search", "query")?;
        let headers = bearer_headers(self.api_key_env.as_deref())?;
        let body = json!({ "query": query });
        let response = self
            .transport
            .post_json(&self.endpoint, &headers, &body)
            .map_err(|e| ToolError::Failed {
                tool: "pubmed_search".to_string(),
                message: e.to_string(),
            })?;
        let records: Vec<PubmedRecord> = response
            .get("results")
            .and_then(Value::as_array)
            .map(|items| {
                items
                    .iter()
                    .filter_map(|item| {
                        Some(PubmedRecord {
                            pmid: item.get("pmid")?.as_str()?.to_string(),
                            title: item.get("title")?.as_str()?.to_string(),
                            abstract_text: item.get("abstract")?.as_str()?.to_string(),
                        })
                    })
                    .collect()
            })
            .unwrap_or_default();
        let (chunks, key) = index_abstracts(&self.store, &self.embedder, query, &records)?;
        Ok(pubmed_output(query, &records, chunks, &key))
    }
}

pub fn oncokb_spec() -> ToolSpec {
    ToolSpec::new(
        "oncokb_lookup",
        "Looks up the clinical evidence record for a gene alteration.",
        &[
            ("gene", "string", "gene symbol", true),
            ("alteration", "string", "alteration, e.g. V600E or ROS1 fusion", true),
        ],
    )
}

fn oncokb_record(
    gene: &str,
    alteration: &str,
    oncogenicity: Option<&str>,
    evidence_level: Option<&str>,
    therapies: &[&str],
) -> ToolOutput {
    let found = oncogenicity.is_some();
    let status = if found { "found" } else { "not found" };
    let summary = if found {
        format!(
            "oncokb_lookup: {gene} {alteration} is {} ({}), {} therapy option(s)",
            oncogenicity.unwrap_or_default(),
            evidence_level.unwrap_or_default(),
            therapies.len()
        )
    } else {
        format!("oncokb_lookup: no entry for {gene} {alteration}")
    };
    ToolOutput {
        output: json!({
            "gene": gene,
            "alteration": alteration,
            "status": status,
            "oncogenicity": oncogenicity,
            "evidence_level": evidence_level,
            "therapies": therapies,
        }),
        summary,
    }
}

/// Static evidence table covering the fixture alterations; anything else is
/// reported as not found rather than as an error.
pub struct MockOncoKb;

impl Tool for MockOncoKb {
    fn spec(&self) -> ToolSpec {
        oncokb_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let gene = required_str(args, "oncokb_lookup", "gene")?.trim().to_uppercase();
        if gene.is_empty() {
            return Err(ToolError::InvalidArguments {
                tool: "oncokb_lookup".to_string(),
                message: "gene must be non-empty".to_string(),
            });
        }
        let alteration = required_str(args, "oncokb_lookup", "alteration")?.trim().to_string();
        let alt_key = alteration.to_lowercase();
        let output = match (gene.as_str(), alt_key.as_str()) {
            ("BRAF", "v600e") => oncokb_record(
                &gene,
                &alteration,
                Some("Oncogenic"),
                Some("LEVEL_1"),
                &["Encorafenib + Cetuximab", "Dabrafenib + Trametinib"],
            ),
            ("CD74", "ros1 fusion") | ("ROS1", "cd74-ros1 fusion") => oncokb_record(
                &gene,
                &alteration,
                Some("Oncogenic"),
                Some("LEVEL_1"),
                &["Crizotinib", "Entrectinib"],
            ),
            _ => oncokb_record(&gene, &alteration, None, None, &[]),
        };
        Ok(output)
    }
}

/// HTTP adapter for an evidence service that answers {gene, alteration} with
/// the full record.
pub struct RemoteOncoKb {
    transport: Arc<dyn Transport>,
    endpoint: String,
    api_key_env: Option<String>,
}

impl RemoteOncoKb {
    pub fn new(transport: Arc<dyn Transport>, endpoint: String, api_key_env: Option<String>) -> Self {
        Self { transport, endpoint, api_key_env }
    }
}

impl Tool for RemoteOncoKb {
    fn spec(&self) -> ToolSpec {
        oncokb_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let gene = required_str(args, "oncokb_lookup", "gene")?.trim().to_string();
        if gene.is_empty() {
            return Err(ToolError::InvalidArguments {
                tool: "oncokb_lookup".to_string(),
                message: "gene must be non-empty".to_string(),
            });
        }
        let alteration = required_str(args, "oncokb_lookup", "alteration")?;
        let headers = bearer_headers(self.api_key_env.as_deref())?;
        let body = json!({ "gene": gene, "alteration": alteration });
        let response = self
            .transport
            .post_json(&self.endpoint, &headers, &body)
            .map_err(|e| ToolError::Failed {
                tool: "oncokb_lookup".to_string(),
                message: e.to_string(),
            })?;
        let summary = format!(
            "oncokb_lookup: {gene} {alteration} {}",
            response.get("status").and_then(Value::as_str).unwrap_or("found")
        );
        Ok(ToolOutput { output: response, summary })
    }
}

pub fn vision_report_spec() -> ToolSpec {
    ToolSpec::new(
        "vision_report",
        "Describes one or more medical images and compares them when several are given.",
        &[
            ("image_refs", "array", "paths of the images to analyze", true),
            ("prompt", "string", "what to look for", true),
        ],
    )
}

/// Per-image report generation through a chat provider, with a comparison
/// pass when more than one image is given. Provider answers matching a
/// refusal marker turn into a refused status.
pub struct VisionTool {
    provider: Arc<dyn ChatProvider>,
    model: String,
    temperature: f32,
    scenario_prefix: String,
    refusal_markers: Vec<String>,
    base_dir: PathBuf,
}

impl VisionTool {
    pub fn new(
        provider: Arc<dyn ChatProvider>,
        model: String,
        temperature: f32,
        scenario_prefix: String,
        refusal_markers: &[String],
        base_dir: PathBuf,
    ) -> Self {
        Self {
            provider,
            model,
            temperature,
            scenario_prefix,
            refusal_markers: refusal_markers.iter().map(|m| m.to_lowercase()).collect(),
            base_dir,
        }
    }

    fn check_refusal(&self, response: &str) -> Result<(), ToolError> {
        let lowered = response.to_lowercase();
        for marker in &self.refusal_markers {
            if lowered.contains(marker) {
                return Err(ToolError::Refused {
                    tool: "vision_report".to_string(),
                    message: format!("refusal marker '{marker}' detected in response"),
                });
            }
        }
        Ok(())
    }
}

impl Tool for VisionTool {
    fn spec(&self) -> ToolSpec {
        vision_report_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let refs: Vec<String> = args
            .get("image_refs")
            .and_then(Value::as_array)
            .map(|items| {
                items.iter().filter_map(|v| v.as_str().map(str::to_string)).collect()
            })
            .unwrap_or_default();
        if refs.is_empty() {
            return Err(ToolError::InvalidArguments {
                tool: "vision_report".to_string(),
                message: "image_refs must be a non-empty array of paths".to_string(),
            });
        }
        let prompt = required_str(args, "vision_report", "prompt")?;

        let mut resolved = Vec::with_capacity(refs.len());
        for arg in &refs {
            let path = resolve_ref(&self.base_dir, arg);
            if !path.exists() {
                return Err(ToolError::Failed {
                    tool: "vision_report".to_string(),
                    message: format!("image not resolvable: {arg}"),
                });
            }
            resolved.push(path);
        }

        let mut reports = Vec::with_capacity(resolved.len());
        for (i, path) in resolved.iter().enumerate() {
            let mut variables = BTreeMap::new();
            variables.insert("scenario_prefix".to_string(), self.scenario_prefix.clone());
            variables.insert("image_label".to_string(), format!("Image {}", i + 1));
            variables.insert("prompt".to_string(), prompt.to_string());
            let request = ChatRequest {
                template_id: TEMPLATE_VISION_REPORT.to_string(),
                variables,
                temperature: self.temperature,
                model: self.model.clone(),
                images: vec![path.to_string_lossy().into_owned()],
            };
            let response = self.provider.complete(&request).map_err(|e| ToolError::Failed {
                tool: "vision_report".to_string(),
                message: e.to_string(),
            })?;
            self.check_refusal(&response)?;
            reports.push(response);
        }

        let report = if reports.len() == 1 {
            reports[0].clone()
        } else {
            let joined = reports
                .iter()
                .enumerate()
                .map(|(i, r)| format!("Image {}: {r}", i + 1))
                .collect::<Vec<_>>()
                .join("\n");
            let mut variables = BTreeMap::new();
            variables.insert("scenario_prefix".to_string(), self.scenario_prefix.clone());
            variables.insert("prompt".to_string(), prompt.to_string());
            variables.insert("reports".to_string(), joined);
            let request = ChatRequest {
                template_id: TEMPLATE_VISION_COMPARE.to_string(),
                variables,
                temperature: self.temperature,
                model: self.model.clone(),
                images: Vec::new(),
            };
            let comparison =
                self.provider.complete(&request).map_err(|e| ToolError::Failed {
                    tool: "vision_report".to_string(),
                    message: e.to_string(),
                })?;
            self.check_refusal(&comparison)?;
            let mut sections: Vec<String> = reports
                .iter()
                .enumerate()
                .map(|(i, r)| format!("Image {}:\n{r}", i + 1))
                .collect();
            sections.push(format!("Comparison:\n{comparison}"));
            sections.join("\n\n")
        };

        Ok(ToolOutput {
            output: json!({ "report": report, "image_count": refs.len() }),
            summary: format!("vision_report: {} image(s) analyzed", refs.len()),
        })
    }
}

pub fn segment_area_spec() -> ToolSpec {
    ToolSpec::new(
        "segment_area",
        "Segments a structure in a medical image and measures its area in pixels.",
        &[
            ("image_ref", "string", "path of the image to segment", true),
            ("point_or_box_prompt", "string", "seed point or bounding box for the structure", true),
        ],
    )
}

/// Fixture-backed segmentation: the mask for `scan.pgm` is the sibling file
/// `scan.mask.pgm`; the area is its count of positive pixels.
pub struct SegmentArea {
    base_dir: PathBuf,
}

impl SegmentArea {
    pub fn new(base_dir: PathBuf) -> Self {
        Self { base_dir }
    }
}

impl Tool for SegmentArea {
    fn spec(&self) -> ToolSpec {
        segment_area_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let image_ref = required_str(args, "segment_area", "image_ref")?;
        let prompt = required_str(args, "segment_area", "point_or_box_prompt")?;
        if prompt.trim().is_empty() {
            return Err(ToolError::InvalidArguments {
                tool: "segment_area".to_string(),
                message: "point_or_box_prompt must be non-empty".to_string(),
            });
        }
        let mask_rel = Path::new(image_ref).with_extension("mask.pgm");
        let mask_path = resolve_ref(&self.base_dir, &mask_rel);
        let mask = image::open(&mask_path).map_err(|e| ToolError::Failed {
            tool: "segment_area".to_string(),
            message: format!("cannot read mask {}: {e}", mask_rel.display()),
        })?;
        let area = mask.to_luma8().pixels().filter(|p| p.0[0] > 0).count() as f64;
        Ok(ToolOutput {
            output: json!({
                "mask_ref": mask_rel.to_string_lossy(),
                "area_pixels": area,
            }),
            summary: format!("segment_area: {image_ref} area {area} px"),
        })
    }
}

pub fn histo_classify_spec() -> ToolSpec {
    ToolSpec::new(
        "histo_classify",
        "Predicts a molecular target from precomputed histopathology features.",
        &[
            ("feature_ref", "string", "path of the precomputed feature file", true),
            ("target", "string", "target of interest: MSI, KRAS, or BRAF", true),
        ],
    )
}

/// Fixture-backed classifier: the feature file maps each target to a
/// {label, score} prediction.
pub struct HistologyClassifier {
    base_dir: PathBuf,
}

impl HistologyClassifier {
    pub fn new(base_dir: PathBuf) -> Self {
        Self { base_dir }
    }
}

impl Tool for HistologyClassifier {
    fn spec(&self) -> ToolSpec {
        histo_classify_spec()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        let feature_ref = required_str(args, "histo_classify", "feature_ref")?;
        let target = required_str(args, "histo_classify", "target")?.trim().to_uppercase();
        if !["MSI", "KRAS", "BRAF"].contains(&target.as_str()) {
            return Err(ToolError::InvalidArguments {
                tool: "histo_classify".to_string(),
                message: format!("target must be MSI, KRAS, or BRAF, got '{target}'"),
            });
        }
        let path = resolve_ref(&self.base_dir, feature_ref);
        let raw = std::fs::read_to_string(&path).map_err(|e| ToolError::Failed {
            tool: "histo_classify".to_string(),
            message: format!("cannot read features {feature_ref}: {e}"),
        })?;
        let table: Value = serde_json::from_str(&raw).map_err(|e| ToolError::Failed {
            tool: "histo_classify".to_string(),
            message: format!("malformed feature file {feature_ref}: {e}"),
        })?;
        let entry = table.get(&target).ok_or_else(|| ToolError::Failed {
            tool: "histo_classify".to_string(),
            message: format!("no prediction for target {target} in {feature_ref}"),
        })?;
        let label = entry.get("label").and_then(Value::as_str).ok_or_else(|| {
            ToolError::Failed {
                tool: "histo_classify".to_string(),
                message: format!("prediction for {target} has no label"),
            }
        })?;
        let score = entry.get("score").and_then(Value::as_f64).ok_or_else(|| {
            ToolError::Failed {
                tool: "histo_classify".to_string(),
                message: format!("prediction for {target} has no score"),
            }
        })?;
        if !["positive", "negative"].contains(&label) || !(0.0..=1.0).contains(&score) {
            return Err(ToolError::Failed {
                tool: "histo_classify".to_string(),
                message: format!("invalid prediction for {target}: label {label}, score {score}"),
            });
        }
        Ok(ToolOutput {
            output: json!({ "target": target, "label": label, "score": score }),
            summary: format!("histo_classify: {target} {label} (score {score:.2})"),
        })
    }
}

/// Generic HTTP adapter: posts the call arguments verbatim and passes the
/// JSON response through. Used for live segmentation and histology services.
pub struct RemoteJsonTool {
    spec: ToolSpec,
    transport: Arc<dyn Transport>,
    endpoint: String,
    api_key_env: Option<String>,
}

impl RemoteJsonTool {
    pub fn new(
        spec: ToolSpec,
        transport: Arc<dyn Transport>,
        endpoint: String,
        api_key_env: Option<String>,
    ) -> Self {
        Self { spec, transport, endpoint, api_key_env }
    }
}

impl Tool for RemoteJsonTool {
    fn spec(&self) -> ToolSpec {
        self.spec.clone()
    }

    fn invoke(&self, args: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
        for required in &self.spec.parameters.required {
            if !args.contains_key(required) {
                return Err(ToolError::InvalidArguments {
                    tool: self.spec.name.clone(),
                    message: format!("missing argument '{required}'"),
                });
            }
        }
        let headers = bearer_headers(self.api_key_env.as_deref())?;
        let body = Value::Object(args.clone());
        let response = self
            .transport
            .post_json(&self.endpoint, &headers, &body)
            .map_err(|e| ToolError::Failed {
                tool: self.spec.name.clone(),
                message: e.to_string(),
            })?;
        Ok(ToolOutput {
            output: response,
            summary: format!("{}: ok", self.spec.name),
        })
    }
}
