//! The retrieval half of the response pipeline: subquery decomposition,
//! per-subquery dense retrieval, reranking, top-k truncation, and the merge
//! into a deduplicated, numbered question context.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::index::{EmbeddingProvider, IndexError, VectorIndex};
use crate::provider::{ChatProvider, ChatRequest, ProviderError};
use crate::transport::Transport;
use crate::util::normalized_text_key;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubqueryOrigin {
    ModelGenerated,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subquery {
    pub text: String,
    pub origin: SubqueryOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPassage {
    pub chunk_id: String,
    pub text: String,
    pub metadata: BTreeMap<String, String>,
    pub retrieval_score: f32,
    pub rerank_score: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RerankerKind {
    Cosine,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub n: usize,
    pub k: usize,
    pub max_subqueries: usize,
    pub reranker: RerankerKind,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { n: 40, k: 10, max_subqueries: 12, reranker: RerankerKind::Cosine }
    }
}

/// One numbered passage of the question context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberedSource {
    pub number: usize,
    pub chunk_id: String,
    pub text: String,
    pub metadata: BTreeMap<String, String>,
}

/// The merged, deduplicated, "Source i"-numbered retrieval result.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuestionContext {
    pub sources: Vec<NumberedSource>,
}

impl QuestionContext {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn get(&self, number: usize) -> Option<&NumberedSource> {
        self.sources.get(number.checked_sub(1)?)
    }

    /// Source number -> chunk id; inverts the numbering exactly.
    pub fn provenance(&self) -> BTreeMap<usize, String> {
        self.sources.iter().map(|s| (s.number, s.chunk_id.clone())).collect()
    }

    /// Prompt rendering: "Source i: text" blocks.
    pub fn rendered(&self) -> String {
        self.sources
            .iter()
            .map(|s| format!("Source {}: {}", s.number, s.text))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// Anything that can serve ranked passages for a subquery: the corpus index,
/// ephemeral per-case indexes, recorded transcripts during replay, or a
/// combination.
pub trait PassageSource: Send + Sync {
    fn retrieve(&self, subquery: &str, n: usize) -> Result<Vec<RankedPassage>, RetrievalError>;
}

/// Dense retrieval over one vector index.
pub struct IndexSource {
    index: Arc<VectorIndex>,
    embedder: Arc<dyn EmbeddingProvider>,
}

impl IndexSource {
    pub fn new(index: Arc<VectorIndex>, embedder: Arc<dyn EmbeddingProvider>) -> Self {
        Self { index, embedder }
    }
}

impl PassageSource for IndexSource {
    fn retrieve(&self, subquery: &str, n: usize) -> Result<Vec<RankedPassage>, RetrievalError> {
        retrieve_for_subquery(&self.index, self.embedder.as_ref(), subquery, n)
    }
}

/// Retrieves `n` passages for a subquery by exact cosine search, scores
/// descending, ties by chunk id.
pub fn retrieve_for_subquery(
    index: &VectorIndex,
    embedder: &dyn EmbeddingProvider,
    subquery: &str,
    n: usize,
) -> Result<Vec<RankedPassage>, RetrievalError> {
    if index.is_empty() {
        return Ok(Vec::new());
    }
    let query = embedder
        .embed(std::slice::from_ref(&subquery.to_string()))
        .map_err(IndexError::Embed)?
        .remove(0);
    let hits = index.search(&query, n, None)?;
    Ok(hits
        .into_iter()
        .map(|hit| {
            let chunk = index.chunk(&hit.chunk_id).expect("hit resolves to stored chunk");
            RankedPassage {
                chunk_id: hit.chunk_id,
                text: chunk.text.clone(),
                metadata: chunk.metadata.clone(),
                retrieval_score: hit.score,
                rerank_score: hit.score,
            }
        })
        .collect())
}

/// Per-case indexes created by tools at run time (literature abstracts land
/// here, separate from the main corpus). Keys are kept sorted so merged
/// retrieval is deterministic regardless of tool scheduling order.
#[derive(Default)]
pub struct EphemeralStore {
    indexes: Mutex<Vec<(String, Arc<VectorIndex>)>>,
}

impl EphemeralStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, key: String, index: VectorIndex) {
        let mut guard = self.indexes.lock().unwrap();
        match guard.binary_search_by(|(k, _)| k.as_str().cmp(key.as_str())) {
            Ok(i) => guard[i] = (key, Arc::new(index)),
            Err(i) => guard.insert(i, (key, Arc::new(index))),
        }
    }

    pub fn keys(&self) -> Vec<String> {
        self.indexes.lock().unwrap().iter().map(|(k, _)| k.clone()).collect()
    }

    pub fn snapshot(&self) -> Vec<(String, Arc<VectorIndex>)> {
        self.indexes.lock().unwrap().clone()
    }
}

/// Merges the corpus index with every ephemeral index, keeping the top `n`
/// passages across all of them by retrieval score (ties by chunk id).
pub struct CompositeSource {
    main: IndexSource,
    store: Arc<EphemeralStore>,
    embedder: Arc<dyn EmbeddingProvider>,
}

impl CompositeSource {
    pub fn new(
        index: Arc<VectorIndex>,
        store: Arc<EphemeralStore>,
        embedder: Arc<dyn EmbeddingProvider>,
    ) -> Self {
        Self { main: IndexSource::new(index, embedder.clone()), store, embedder }
    }
}

impl PassageSource for CompositeSource {
    fn retrieve(&self, subquery: &str, n: usize) -> Result<Vec<RankedPassage>, RetrievalError> {
        let mut all = self.main.retrieve(subquery, n)?;
        for (_, index) in self.store.snapshot() {
            all.extend(retrieve_for_subquery(&index, self.embedder.as_ref(), subquery, n)?);
        }
        all.sort_by(|a, b| {
            b.retrieval_score
                .partial_cmp(&a.retrieval_score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        all.truncate(n);
        Ok(all)
    }
}

/// Replay source: passages recorded in a transcript, keyed by subquery text.
pub struct RecordedSource {
    by_subquery: BTreeMap<String, Vec<RankedPassage>>,
}

impl RecordedSource {
    pub fn new(by_subquery: BTreeMap<String, Vec<RankedPassage>>) -> Self {
        Self { by_subquery }
    }
}

impl PassageSource for RecordedSource {
    fn retrieve(&self, subquery: &str, n: usize) -> Result<Vec<RankedPassage>, RetrievalError> {
        let mut passages = self.by_subquery.get(subquery).cloned().unwrap_or_default();
        passages.truncate(n);
        Ok(passages)
    }
}

/// Asks the model to decompose the question, parsing one subquery per line.
/// Bullet markers and list numbering are stripped; lines beyond the cap are
/// truncated; zero parseable lines fall back to the question itself.
pub fn generate_subqueries(
    provider: &dyn ChatProvider,
    request: &ChatRequest,
    question: &str,
    config: &RetrievalConfig,
) -> Result<Vec<Subquery>, RetrievalError> {
    if question.trim().is_empty() {
        return Err(RetrievalError::InvalidArgument("question is empty".into()));
    }
    let response = provider.complete(request)?;
    let mut subqueries: Vec<Subquery> = response
        .lines()
        .map(strip_list_marker)
        .filter(|l| !l.is_empty())
        .map(|text| Subquery { text: text.to_string(), origin: SubqueryOrigin::ModelGenerated })
        .collect();
    subqueries.truncate(config.max_subqueries);
    if subqueries.is_empty() {
        subqueries
            .push(Subquery { text: question.to_string(), origin: SubqueryOrigin::Manual });
    }
    Ok(subqueries)
}

pub(crate) fn strip_list_marker(line: &str) -> &str {
    let trimmed = line.trim();
    let rest = trimmed.trim_start_matches(|c: char| c.is_ascii_digit());
    let rest = if rest.len() < trimmed.len() {
        rest.strip_prefix(['.', ')']).unwrap_or(trimmed)
    } else {
        trimmed.strip_prefix(['-', '*', '•']).unwrap_or(trimmed)
    };
    rest.trim()
}

/// Reorders passages by descending rerank score. The cosine reranker adopts
/// the retrieval score (leaving the order untouched); the external reranker
/// posts {query, documents, top_n} and expects {results: [{index,
/// relevance_score}]}, falling back to cosine order on any failure.
pub fn rerank(
    passages: Vec<RankedPassage>,
    subquery: &str,
    reranker: &Reranker,
) -> Vec<RankedPassage> {
    match reranker {
        Reranker::Cosine => passages
            .into_iter()
            .map(|mut p| {
                p.rerank_score = p.retrieval_score;
                p
            })
            .collect(),
        Reranker::External { transport, endpoint } => {
            match external_rerank(passages.clone(), subquery, transport.as_ref(), endpoint) {
                Ok(reranked) => reranked,
                Err(e) => {
                    log::warn!("external reranker failed, keeping cosine order: {e}");
                    rerank(passages, subquery, &Reranker::Cosine)
                }
            }
        }
    }
}

pub enum Reranker {
    Cosine,
    External { transport: Arc<dyn Transport>, endpoint: String },
}

fn external_rerank(
    passages: Vec<RankedPassage>,
    subquery: &str,
    transport: &dyn Transport,
    endpoint: &str,
) -> Result<Vec<RankedPassage>, RetrievalError> {
    if passages.is_empty() {
        return Ok(passages);
    }
    let documents: Vec<&str> = passages.iter().map(|p| p.text.as_str()).collect();
    let body = json!({ "query": subquery, "documents": documents, "top_n": passages.len() });
    let response = transport
        .post_json(endpoint, &[], &body)
        .map_err(|e| RetrievalError::InvalidArgument(e.to_string()))?;
    let results = response
        .get("results")
        .and_then(|r| r.as_array())
        .ok_or_else(|| RetrievalError::InvalidArgument("rerank response missing results".into()))?;
    let mut scored: Vec<RankedPassage> = Vec::with_capacity(passages.len());
    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    for item in results {
        let idx = item.get("index").and_then(|v| v.as_u64()).ok_or_else(|| {
            RetrievalError::InvalidArgument("rerank result missing index".into())
        })? as usize;
        let score = item.get("relevance_score").and_then(|v| v.as_f64()).ok_or_else(|| {
            RetrievalError::InvalidArgument("rerank result missing relevance_score".into())
        })?;
        scores.insert(idx, score);
    }
    for (idx, mut passage) in passages.into_iter().enumerate() {
        let score = scores.get(&idx).copied().ok_or_else(|| {
            RetrievalError::InvalidArgument(format!("rerank response omitted document {idx}"))
        })?;
        passage.rerank_score = score as f32;
        scored.push(passage);
    }
    scored.sort_by(|a, b| {
        b.rerank_score
            .partial_cmp(&a.rerank_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    Ok(scored)
}

/// First `k` of a rerank-sorted list. `k` must be positive.
pub fn top_k(passages: Vec<RankedPassage>, k: usize) -> Result<Vec<RankedPassage>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidArgument("k must be at least 1".into()));
    }
    let mut passages = passages;
    passages.truncate(k);
    Ok(passages)
}

/// Concatenates per-subquery lists in order, drops passages whose normalized
/// text was already seen, and numbers the survivors "Source 1..N".
pub fn merge_and_dedup(per_subquery: &[Vec<RankedPassage>]) -> QuestionContext {
    let mut seen = std::collections::HashSet::new();
    let mut sources = Vec::new();
    for list in per_subquery {
        for passage in list {
            let key = normalized_text_key(&passage.text);
            if seen.insert(key) {
                sources.push(NumberedSource {
                    number: sources.len() + 1,
                    chunk_id: passage.chunk_id.clone(),
                    text: passage.text.clone(),
                    metadata: passage.metadata.clone(),
                });
            }
        }
    }
    QuestionContext { sources }
}

/// The full retrieval pipeline for a set of subqueries: retrieve n, rerank,
/// keep top k, merge, dedup, number. Also returns the per-subquery passage
/// lists for the transcript.
pub fn run_retrieval(
    source: &dyn PassageSource,
    subqueries: &[Subquery],
    config: &RetrievalConfig,
    reranker: &Reranker,
) -> Result<(QuestionContext, Vec<Vec<RankedPassage>>), RetrievalError> {
    let mut per_subquery = Vec::with_capacity(subqueries.len());
    for subquery in subqueries {
        let retrieved = source.retrieve(&subquery.text, config.n)?;
        let reranked = if retrieved.is_empty() {
            retrieved
        } else {
            rerank(retrieved, &subquery.text, reranker)
        };
        per_subquery.push(top_k(reranked, config.k)?);
    }
    Ok((merge_and_dedup(&per_subquery), per_subquery))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{Chunk, MockEmbedder};
    use crate::provider::{ScriptedProvider, TEMPLATE_SUBQUERIES};
    use crate::transport::RecordingTransport;
    use proptest::prelude::*;
    use std::collections::BTreeMap as Map;

    fn passage(id: &str, text: &str, score: f32) -> RankedPassage {
        RankedPassage {
            chunk_id: id.to_string(),
            text: text.to_string(),
            metadata: Map::new(),
            retrieval_score: score,
            rerank_score: score,
        }
    }

    fn fixture_index(texts: &[&str]) -> (Arc<VectorIndex>, Arc<MockEmbedder>) {
        let embedder = Arc::new(MockEmbedder::new(16));
        let mut index = VectorIndex::new(16);
        for (i, text) in texts.iter().enumerate() {
            let chunk = Chunk {
                doc_id: "d".into(),
                chunk_id: format!("c{i:02}"),
                window: 128,
                token_start: 0,
                token_len: 1,
                text: text.to_string(),
                metadata: Map::new(),
            };
            let v = embedder.embed(&[text.to_string()]).unwrap().remove(0);
            index.insert(chunk, v).unwrap();
        }
        (Arc::new(index), embedder)
    }

    fn chat_request() -> ChatRequest {
        ChatRequest {
            template_id: TEMPLATE_SUBQUERIES.to_string(),
            variables: Map::new(),
            temperature: 0.1,
            model: "m".to_string(),
            images: vec![],
        }
    }

    #[test]
    fn subqueries_parse_in_order() {
        let provider = ScriptedProvider::new();
        provider.push(TEMPLATE_SUBQUERIES, "first\n2. second\n- third".into());
        let got = generate_subqueries(
            &provider,
            &chat_request(),
            "q?",
            &RetrievalConfig::default(),
        )
        .unwrap();
        let texts: Vec<&str> = got.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["first", "second", "third"]);
        assert!(got.iter().all(|s| s.origin == SubqueryOrigin::ModelGenerated));
    }

    #[test]
    fn subqueries_truncate_at_cap() {
        let provider = ScriptedProvider::new();
        let lines: Vec<String> = (1..=15).map(|i| format!("q{i}")).collect();
        provider.push(TEMPLATE_SUBQUERIES, lines.join("\n"));
        let got = generate_subqueries(
            &provider,
            &chat_request(),
            "q?",
            &RetrievalConfig::default(),
        )
        .unwrap();
        assert_eq!(got.len(), 12);
        assert_eq!(got.last().unwrap().text, "q12");
    }

    #[test]
    fn subqueries_fall_back_to_question() {
        let provider = ScriptedProvider::new();
        provider.push(TEMPLATE_SUBQUERIES, "   \n\n".into());
        let got = generate_subqueries(
            &provider,
            &chat_request(),
            "the question",
            &RetrievalConfig::default(),
        )
        .unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].text, "the question");
        assert_eq!(got[0].origin, SubqueryOrigin::Manual);
    }

    #[test]
    fn retrieve_returns_all_when_fewer_than_n() {
        let (index, embedder) = fixture_index(&["alpha", "beta", "gamma", "delta", "epsilon"]);
        let got = retrieve_for_subquery(&index, embedder.as_ref(), "alpha", 40).unwrap();
        assert_eq!(got.len(), 5);
    }

    #[test]
    fn retrieve_self_text_ranks_first() {
        let (index, embedder) = fixture_index(&["alpha beta", "gamma delta", "epsilon zeta"]);
        let got = retrieve_for_subquery(&index, embedder.as_ref(), "gamma delta", 3).unwrap();
        assert_eq!(got[0].text, "gamma delta");
        assert!((got[0].retrieval_score - 1.0).abs() < 1e-5);
    }

    #[test]
    fn cosine_rerank_preserves_order() {
        let input = vec![passage("a", "t1", 0.9), passage("b", "t2", 0.5)];
        let out = rerank(input.clone(), "q", &Reranker::Cosine);
        assert_eq!(out, input);
        let single = rerank(vec![passage("a", "t", 0.3)], "q", &Reranker::Cosine);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn external_rerank_reorders_and_falls_back() {
        let transport = Arc::new(RecordingTransport::with_responses(vec![serde_json::json!({
            "results": [
                {"index": 0, "relevance_score": 0.1},
                {"index": 1, "relevance_score": 0.9}
            ]
        })]));
        let reranker =
            Reranker::External { transport, endpoint: "http://rerank.local".to_string() };
        let input = vec![passage("a", "t1", 0.9), passage("b", "t2", 0.5)];
        let out = rerank(input.clone(), "q", &reranker);
        assert_eq!(out[0].chunk_id, "b");
        assert!((out[0].rerank_score - 0.9).abs() < 1e-6);

        // empty transport queue: every call fails, order falls back to cosine
        let failing = Reranker::External {
            transport: Arc::new(RecordingTransport::new()),
            endpoint: "http://rerank.local".to_string(),
        };
        let out = rerank(input.clone(), "q", &failing);
        assert_eq!(out, rerank(input, "q", &Reranker::Cosine));
    }

    #[test]
    fn top_k_truncates() {
        let passages: Vec<RankedPassage> =
            (0..40).map(|i| passage(&format!("c{i}"), &format!("t{i}"), 1.0 - i as f32 / 100.0)).collect();
        assert_eq!(top_k(passages.clone(), 10).unwrap().len(), 10);
        assert_eq!(top_k(passages[..3].to_vec(), 10).unwrap().len(), 3);
        assert!(top_k(passages, 0).is_err());
    }

    #[test]
    fn merge_dedups_identical_and_normalized_duplicates() {
        let a = vec![passage("a1", "shared passage", 0.9), passage("a2", "unique a", 0.8)];
        let b = vec![passage("b1", "  Shared   PASSAGE ", 0.7), passage("b2", "unique b", 0.6)];
        let ctx = merge_and_dedup(&[a, b]);
        assert_eq!(ctx.len(), 3);
        let numbers: Vec<usize> = ctx.sources.iter().map(|s| s.number).collect();
        assert_eq!(numbers, vec![1, 2, 3]);
        assert_eq!(ctx.get(1).unwrap().chunk_id, "a1");
        assert_eq!(ctx.get(3).unwrap().chunk_id, "b2");
    }

    #[test]
    fn merge_numbering_without_collisions() {
        let lists: Vec<Vec<RankedPassage>> = (0..12)
            .map(|s| (0..10).map(|i| passage(&format!("c{s}-{i}"), &format!("text {s} {i}"), 0.5)).collect())
            .collect();
        let ctx = merge_and_dedup(&lists);
        assert_eq!(ctx.len(), 120);
        assert_eq!(ctx.sources.last().unwrap().number, 120);
    }

    #[test]
    fn provenance_inverts_numbering() {
        let ctx = merge_and_dedup(&[vec![passage("x", "one", 0.9), passage("y", "two", 0.8)]]);
        let prov = ctx.provenance();
        for source in &ctx.sources {
            assert_eq!(prov[&source.number], source.chunk_id);
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let (index, embedder) = fixture_index(&[
            "braf inhibitor therapy",
            "ros1 fusion treatment",
            "msi high immunotherapy",
            "colorectal cancer staging",
        ]);
        let source = IndexSource::new(index, embedder);
        let subqueries = vec![
            Subquery { text: "braf therapy".into(), origin: SubqueryOrigin::ModelGenerated },
            Subquery { text: "ros1 options".into(), origin: SubqueryOrigin::ModelGenerated },
        ];
        let config = RetrievalConfig { n: 4, k: 2, ..Default::default() };
        let (ctx1, lists1) = run_retrieval(&source, &subqueries, &config, &Reranker::Cosine).unwrap();
        let (ctx2, lists2) = run_retrieval(&source, &subqueries, &config, &Reranker::Cosine).unwrap();
        assert_eq!(ctx1, ctx2);
        assert_eq!(lists1, lists2);
        assert!(ctx1.len() <= config.max_subqueries * config.k);
    }

    #[test]
    fn composite_source_merges_ephemeral_indexes() {
        let (main, embedder) = fixture_index(&["guideline text about braf"]);
        let store = Arc::new(EphemeralStore::new());
        let mut extra = VectorIndex::new(16);
        let text = "abstract about braf inhibitors";
        let chunk = Chunk {
            doc_id: "pm1".into(),
            chunk_id: "pm1:w128:t0".into(),
            window: 128,
            token_start: 0,
            token_len: 4,
            text: text.to_string(),
            metadata: Map::new(),
        };
        let v = embedder.embed(&[text.to_string()]).unwrap().remove(0);
        extra.insert(chunk, v).unwrap();
        store.insert("literature:braf".into(), extra);

        let source = CompositeSource::new(main, store, embedder);
        let got = source.retrieve("braf inhibitors", 10).unwrap();
        assert_eq!(got.len(), 2);
        let ids: Vec<&str> = got.iter().map(|p| p.chunk_id.as_str()).collect();
        assert!(ids.contains(&"pm1:w128:t0"));
    }

    proptest! {
        #[test]
        fn merge_dedup_is_idempotent(texts in prop::collection::vec("[a-z ]{1,20}", 0..30)) {
            let list: Vec<RankedPassage> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| passage(&format!("c{i}"), t, 0.5))
                .collect();
            let once = merge_and_dedup(&[list]);
            let again_input: Vec<RankedPassage> = once
                .sources
                .iter()
                .map(|s| RankedPassage {
                    chunk_id: s.chunk_id.clone(),
                    text: s.text.clone(),
                    metadata: s.metadata.clone(),
                    retrieval_score: 0.0,
                    rerank_score: 0.0,
                })
                .collect();
            let twice = merge_and_dedup(&[again_input]);
            prop_assert_eq!(once.sources.len(), twice.sources.len());
            for (a, b) in once.sources.iter().zip(&twice.sources) {
                prop_assert_eq!(a.number, b.number);
                prop_assert_eq!(&a.chunk_id, &b.chunk_id);
                prop_assert_eq!(&a.text, &b.text);
            }
        }

        #[test]
        fn numbering_is_contiguous_bijection(texts in prop::collection::vec("[a-z]{1,8}", 0..40)) {
            let list: Vec<RankedPassage> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| passage(&format!("c{i}"), t, 0.5))
                .collect();
            let ctx = merge_and_dedup(&[list]);
            for (i, source) in ctx.sources.iter().enumerate() {
                prop_assert_eq!(source.number, i + 1);
            }
            let prov = ctx.provenance();
            prop_assert_eq!(prov.len(), ctx.sources.len());
            // no two surviving entries share normalized text
            let keys: std::collections::HashSet<String> =
                ctx.sources.iter().map(|s| normalized_text_key(&s.text)).collect();
            prop_assert_eq!(keys.len(), ctx.sources.len());
        }
    }
}
