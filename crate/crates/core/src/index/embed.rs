//! Embedding providers: a deterministic offline mock and a thin remote
//! HTTP adapter.

use std::sync::Arc;

use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::index::tokenize;
use crate::transport::{Transport, TransportError};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding transport failed after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: TransportError },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding provider response malformed: {0}")]
    MalformedResponse(String),
    #[error("missing API key environment variable {0}")]
    MissingApiKey(String),
}

pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

/// Deterministic offline embedder: each token seeds a ChaCha8 stream from its
/// SHA-256 digest and draws a standard-normal vector; token vectors are summed
/// and L2-normalized. Equal texts always embed identically, related texts
/// share token components, and no network is involved.
pub struct MockEmbedder {
    dimension: usize,
}

impl MockEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            // empty text still embeds: a single pseudo-token keeps this total
            tokens.push(String::new());
        }
        let mut acc = vec![0f32; self.dimension];
        for token in &tokens {
            let digest = Sha256::digest(token.as_bytes());
            let mut seed = [0u8; 32];
            seed.copy_from_slice(&digest);
            let mut rng = ChaCha8Rng::from_seed(seed);
            for slot in acc.iter_mut() {
                let draw: f32 = StandardNormal.sample(&mut rng);
                *slot += draw;
            }
        }
        let norm = l2_norm(&acc);
        if norm > 0.0 {
            for slot in acc.iter_mut() {
                *slot /= norm;
            }
        } else {
            acc[0] = 1.0;
        }
        acc
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Remote embedding endpoint speaking the common JSON contract:
/// request {input: [..], model} -> response {data: [{embedding: [..]}]}.
pub struct RemoteEmbedder {
    transport: Arc<dyn Transport>,
    endpoint: String,
    model: String,
    api_key_env: String,
    dimension: usize,
    max_retries: u32,
}

impl RemoteEmbedder {
    pub fn new(
        transport: Arc<dyn Transport>,
        endpoint: String,
        model: String,
        api_key_env: String,
        dimension: usize,
        max_retries: u32,
    ) -> Self {
        Self { transport, endpoint, model, api_key_env, dimension, max_retries }
    }

    fn headers(&self) -> Result<Vec<(String, String)>, EmbedError> {
        let key = std::env::var(&self.api_key_env)
            .map_err(|_| EmbedError::MissingApiKey(self.api_key_env.clone()))?;
        Ok(vec![("Authorization".to_string(), format!("Bearer {key}"))])
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let headers = self.headers()?;
        let body = json!({ "input": texts, "model": self.model });
        let attempts = self.max_retries.max(1);
        let mut last = None;
        for _ in 0..attempts {
            match self.transport.post_json(&self.endpoint, &headers, &body) {
                Ok(value) => {
                    let data = value
                        .get("data")
                        .and_then(|d| d.as_array())
                        .ok_or_else(|| EmbedError::MalformedResponse("missing data array".into()))?;
                    let mut out = Vec::with_capacity(data.len());
                    for item in data {
                        let emb = item
                            .get("embedding")
                            .and_then(|e| e.as_array())
                            .ok_or_else(|| {
                                EmbedError::MalformedResponse("missing embedding array".into())
                            })?;
                        let vector: Vec<f32> =
                            emb.iter().filter_map(|x| x.as_f64()).map(|x| x as f32).collect();
                        if vector.len() != self.dimension {
                            return Err(EmbedError::DimensionMismatch {
                                expected: self.dimension,
                                got: vector.len(),
                            });
                        }
                        out.push(vector);
                    }
                    if out.len() != texts.len() {
                        return Err(EmbedError::MalformedResponse(format!(
                            "expected {} embeddings, got {}",
                            texts.len(),
                            out.len()
                        )));
                    }
                    return Ok(out);
                }
                Err(e) => last = Some(e),
            }
        }
        Err(EmbedError::Transport { attempts, last: last.expect("at least one attempt") })
    }
}

pub fn l2_norm(v: &[f32]) -> f32 {
    v.iter().map(|x| x * x).sum::<f32>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::RecordingTransport;

    #[test]
    fn mock_is_deterministic_and_unit_norm() {
        let e = MockEmbedder::new(16);
        let a = e.embed(&["BRAF V600E".to_string()]).unwrap();
        let b = e.embed(&["BRAF V600E".to_string()]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), 16);
        let norm = l2_norm(&a[0]);
        assert!((norm - 1.0).abs() < 1e-5, "norm {norm}");
    }

    #[test]
    fn mock_distinguishes_texts_and_handles_empty() {
        let e = MockEmbedder::new(16);
        let out = e.embed(&["alpha".to_string(), "beta".to_string(), String::new()]).unwrap();
        assert_ne!(out[0], out[1]);
        assert_eq!(out[2].len(), 16);
        assert!((l2_norm(&out[2]) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn remote_parses_contract_and_checks_dimension() {
        std::env::set_var("EMBED_TEST_KEY", "k");
        let transport = Arc::new(RecordingTransport::with_responses(vec![serde_json::json!({
            "data": [ {"embedding": [1.0, 0.0, 0.0]}, {"embedding": [0.0, 1.0, 0.0]} ]
        })]));
        let e = RemoteEmbedder::new(
            transport.clone(),
            "http://embed.local/v1".into(),
            "test-model".into(),
            "EMBED_TEST_KEY".into(),
            3,
            2,
        );
        let out = e.embed(&["a".to_string(), "b".to_string()]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(transport.call_count(), 1);

        let bad = RemoteEmbedder::new(
            Arc::new(RecordingTransport::with_responses(vec![serde_json::json!({
                "data": [ {"embedding": [1.0, 0.0]} ]
            })])),
            "http://embed.local/v1".into(),
            "test-model".into(),
            "EMBED_TEST_KEY".into(),
            3,
            1,
        );
        assert!(matches!(
            bad.embed(&["a".to_string()]),
            Err(EmbedError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn remote_retries_then_fails() {
        std::env::set_var("EMBED_TEST_KEY2", "k");
        let transport = Arc::new(RecordingTransport::new());
        let e = RemoteEmbedder::new(
            transport.clone(),
            "http://embed.local/v1".into(),
            "m".into(),
            "EMBED_TEST_KEY2".into(),
            3,
            3,
        );
        match e.embed(&["a".to_string()]) {
            Err(EmbedError::Transport { attempts: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(transport.call_count(), 3);
    }
}
