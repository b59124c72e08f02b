//! Engine for retrieval-augmented, tool-orchestrating answers to multimodal
//! oncology cases. The crate covers the full loop: literature corpus
//! ingestion and chunking, dense vector retrieval with reranking, validated
//! tool-call plans over imaging, genomic and search tools, cited response
//! generation with per-citation self-checking and one repair pass, JSON
//! transcripts that replay deterministically, and a multi-rater evaluation
//! harness.

pub mod agent;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod index;
pub mod provider;
pub mod retrieval;
pub mod tools;
pub mod transport;
pub mod util;
