//! Token-window chunking and the exact cosine-similarity vector index.

pub mod embed;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{EmbeddingProvider, MockEmbedder, RemoteEmbedder};

use crate::corpus::CuratedDocument;
use crate::util::atomic_write;

pub const DEFAULT_WINDOWS: [usize; 3] = [512, 256, 128];
pub const DEFAULT_OVERLAP: usize = 50;

const INDEX_MAGIC: &str = "oncoagent.index";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("overlap {overlap} must be smaller than the smallest window {window}")]
    OverlapTooLarge { overlap: usize, window: usize },
    #[error("no chunk windows given")]
    NoWindows,
    #[error("dimension mismatch: index dimension {expected}, vector dimension {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index integrity violation: {0}")]
    Integrity(String),
    #[error("unsupported index version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("corrupt index file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Embed(#[from] embed::EmbedError),
}

/// A token span in the source text, as byte offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

/// Splits on Unicode whitespace with ASCII punctuation characters emitted as
/// single-character tokens. Deterministic and total.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_spans(text).iter().map(|s| text[s.start..s.end].to_string()).collect()
}

/// Span-preserving tokenization; `tokenize` is derived from it, and chunk text
/// is sliced from these spans so every chunk is an exact substring.
pub fn tokenize_with_spans(text: &str) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut word_start: Option<usize> = None;
    for (idx, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(start) = word_start.take() {
                spans.push(TokenSpan { start, end: idx });
            }
        } else if ch.is_ascii_punctuation() {
            if let Some(start) = word_start.take() {
                spans.push(TokenSpan { start, end: idx });
            }
            spans.push(TokenSpan { start: idx, end: idx + ch.len_utf8() });
        } else if word_start.is_none() {
            word_start = Some(idx);
        }
    }
    if let Some(start) = word_start {
        spans.push(TokenSpan { start, end: text.len() });
    }
    spans
}

/// One token-windowed segment of a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub chunk_id: String,
    pub window: usize,
    pub token_start: usize,
    pub token_len: usize,
    pub text: String,
    pub metadata: BTreeMap<String, String>,
}

/// Cuts a document at each window size with the configured token overlap.
/// Chunks start at offsets 0, w-overlap, 2(w-overlap), ...; a trailing partial
/// chunk is emitted only when it contributes at least one new token.
pub fn chunk_document(
    doc: &CuratedDocument,
    windows: &[usize],
    overlap: usize,
) -> Result<Vec<Chunk>, IndexError> {
    if windows.is_empty() {
        return Err(IndexError::NoWindows);
    }
    let min_window = *windows.iter().min().expect("nonempty");
    if overlap >= min_window {
        return Err(IndexError::OverlapTooLarge { overlap, window: min_window });
    }

    let spans = tokenize_with_spans(&doc.text);
    let total = spans.len();
    let mut chunks = Vec::new();
    for &window in windows {
        let stride = window - overlap;
        let mut prev_end = 0usize;
        for k in 0.. {
            let offset = k * stride;
            if offset >= total {
                break;
            }
            let end = (offset + window).min(total);
            if k > 0 && end <= prev_end {
                break;
            }
            let text = doc.text[spans[offset].start..spans[end - 1].end].to_string();
            let mut metadata = BTreeMap::new();
            metadata.insert("doc_id".to_string(), doc.id.clone());
            metadata.insert("source".to_string(), source_label(doc));
            metadata.insert("title".to_string(), doc.metadata.title.clone());
            metadata.insert("window".to_string(), window.to_string());
            if let Some(p) = &doc.metadata.published {
                metadata.insert("published".to_string(), p.clone());
            }
            if let Some(u) = &doc.metadata.url {
                metadata.insert("url".to_string(), u.clone());
            }
            chunks.push(Chunk {
                doc_id: doc.id.clone(),
                chunk_id: format!("{}:w{}:t{}", doc.id, window, offset),
                window,
                token_start: offset,
                token_len: end - offset,
                text,
                metadata,
            });
            prev_end = end;
        }
    }
    Ok(chunks)
}

fn source_label(doc: &CuratedDocument) -> String {
    serde_json::to_value(doc.metadata.source)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| "custom".to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub chunk_id: String,
    pub vector: Vec<f32>,
    pub norm: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub chunk_id: String,
    pub score: f32,
}

/// Exact cosine-similarity store over embedded chunks. No approximate
/// structures: every search scans all records, which keeps ranking exactly
/// reproducible by a brute-force oracle.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dimension: usize,
    records: Vec<EmbeddingRecord>,
    chunks: BTreeMap<String, Chunk>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, records: Vec::new(), chunks: BTreeMap::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.chunks.get(chunk_id)
    }

    pub fn chunk_ids(&self) -> impl Iterator<Item = &str> {
        self.chunks.keys().map(String::as_str)
    }

    pub fn insert(&mut self, chunk: Chunk, vector: Vec<f32>) -> Result<(), IndexError> {
        if vector.len() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                got: vector.len(),
            });
        }
        if self.chunks.contains_key(&chunk.chunk_id) {
            return Err(IndexError::Integrity(format!("duplicate chunk id {}", chunk.chunk_id)));
        }
        let norm = embed::l2_norm(&vector);
        // partial_cmp keeps NaN on the rejected side
        if norm.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(IndexError::Integrity(format!(
                "zero-norm vector for chunk {}",
                chunk.chunk_id
            )));
        }
        self.records.push(EmbeddingRecord { chunk_id: chunk.chunk_id.clone(), vector, norm });
        self.chunks.insert(chunk.chunk_id.clone(), chunk);
        Ok(())
    }

    /// Builds an index by chunking and embedding every document.
    pub fn build(
        docs: &[CuratedDocument],
        windows: &[usize],
        overlap: usize,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self, IndexError> {
        let mut index = Self::new(provider.dimension());
        for doc in docs {
            let chunks = chunk_document(doc, windows, overlap)?;
            if chunks.is_empty() {
                continue;
            }
            let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
            let vectors = provider.embed(&texts)?;
            for (chunk, vector) in chunks.into_iter().zip(vectors) {
                index.insert(chunk, vector)?;
            }
        }
        Ok(index)
    }

    /// Exact top-n cosine search. Ties break lexicographically by chunk id;
    /// the optional metadata predicate filters before ranking.
    pub fn search(
        &self,
        query: &[f32],
        top_n: usize,
        filter: Option<&dyn Fn(&Chunk) -> bool>,
    ) -> Result<Vec<SearchHit>, IndexError> {
        if top_n == 0 {
            return Err(IndexError::InvalidArgument("top_n must be at least 1".into()));
        }
        if query.len() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                got: query.len(),
            });
        }
        let query_norm = embed::l2_norm(query);
        let mut hits: Vec<SearchHit> = self
            .records
            .iter()
            .filter(|rec| match filter {
                Some(pred) => {
                    let chunk = self.chunks.get(&rec.chunk_id).expect("record resolves to chunk");
                    pred(chunk)
                }
                None => true,
            })
            .map(|rec| {
                let score = if query_norm > 0.0 {
                    dot(query, &rec.vector) / (query_norm * rec.norm)
                } else {
                    0.0
                };
                SearchHit { chunk_id: rec.chunk_id.clone(), score }
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        hits.truncate(top_n);
        Ok(hits)
    }

    pub fn persist(&self, path: &Path) -> Result<(), IndexError> {
        let file = IndexFile {
            magic: INDEX_MAGIC.to_string(),
            version: INDEX_VERSION,
            dimension: self.dimension,
            count: self.records.len(),
            records: self.records.clone(),
            chunks: self.chunks.values().cloned().collect(),
        };
        let bytes = serde_json::to_vec(&file).expect("index serializes");
        atomic_write(path, &bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let bytes = std::fs::read(path)?;
        let file: IndexFile =
            serde_json::from_slice(&bytes).map_err(|e| IndexError::Corrupt(e.to_string()))?;
        if file.magic != INDEX_MAGIC {
            return Err(IndexError::Corrupt(format!("unrecognized file marker {:?}", file.magic)));
        }
        if file.version != INDEX_VERSION {
            return Err(IndexError::Version { found: file.version, expected: INDEX_VERSION });
        }
        if file.records.len() != file.count {
            return Err(IndexError::Corrupt(format!(
                "record count {} does not match header {}",
                file.records.len(),
                file.count
            )));
        }
        let mut index = Self::new(file.dimension);
        let chunk_map: BTreeMap<String, Chunk> =
            file.chunks.into_iter().map(|c| (c.chunk_id.clone(), c)).collect();
        for rec in file.records {
            let chunk = chunk_map.get(&rec.chunk_id).cloned().ok_or_else(|| {
                IndexError::Integrity(format!("record {} has no stored chunk", rec.chunk_id))
            })?;
            if rec.vector.len() != file.dimension {
                return Err(IndexError::Integrity(format!(
                    "record {} has dimension {}, index declares {}",
                    rec.chunk_id,
                    rec.vector.len(),
                    file.dimension
                )));
            }
            index.records.push(rec);
            index.chunks.insert(chunk.chunk_id.clone(), chunk);
        }
        Ok(index)
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    magic: String,
    version: u32,
    dimension: usize,
    count: usize,
    records: Vec<EmbeddingRecord>,
    chunks: Vec<Chunk>,
}

pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact cosine similarity; computes both norms fresh. The index's search
/// scoring matches this function bit-for-bit because stored norms come from
/// the same `l2_norm`.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> f32 {
    let na = embed::l2_norm(a);
    let nb = embed::l2_norm(b);
    if na > 0.0 && nb > 0.0 {
        dot(a, b) / (na * nb)
    } else {
        0.0
    }
}
