//! Document ingestion: structured sources, cleaning, keyword filtering, and
//! the jsonlines archive format.

pub mod tei;
pub mod text;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tei::{parse_tei, TeiError};
pub use text::{clean_text, collapse_inline, parse_structured_text};

use crate::util::atomic_write;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("keyword list is empty")]
    EmptyKeywords,
    #[error("invalid document {id}: {reason}")]
    InvalidDocument { id: String, reason: String },
    #[error("line {line}: {source}")]
    MalformedLine { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Tei(#[from] TeiError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Mdcalc,
    Uptodate,
    Meditron,
    Asco,
    Esmo,
    Onkopedia,
    Custom,
}

/// One heading plus its paragraphs; `level` is the heading depth, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub level: u32,
    pub heading: String,
    pub paragraphs: Vec<String>,
}

/// A structured document as parsed from TEI or plain text, before cleaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDocument {
    pub id: String,
    pub source: SourceKind,
    pub title: String,
    pub authors: Vec<String>,
    pub published: Option<String>,
    pub url: Option<String>,
    pub sections: Vec<Section>,
}

impl SourceDocument {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |reason: &str| {
            Err(CorpusError::InvalidDocument { id: self.id.clone(), reason: reason.to_string() })
        };
        if self.id.is_empty() {
            return fail("empty id");
        }
        for s in &self.sections {
            if s.level < 1 {
                return fail("heading level below 1");
            }
            for p in &s.paragraphs {
                if p.trim() != p {
                    return fail("paragraph has leading or trailing whitespace");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMetadata {
    pub source: SourceKind,
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub published: Option<String>,
    #[serde(default)]
    pub url: Option<String>,
}

/// A cleaned document: '#'-prefixed heading lines, paragraphs separated by one
/// blank line, no URLs, IPv4 shapes, or control characters other than newline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedDocument {
    pub id: String,
    pub metadata: DocMetadata,
    pub text: String,
}

impl CuratedDocument {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |reason: &str| {
            Err(CorpusError::InvalidDocument { id: self.id.clone(), reason: reason.to_string() })
        };
        if self.id.is_empty() {
            return fail("empty id");
        }
        if text::has_removable_patterns(&self.text) {
            return fail("text contains a URL or IPv4 shape");
        }
        if self.text.chars().any(|c| c != '\n' && c.is_control()) {
            return fail("text contains control characters");
        }
        Ok(())
    }
}

/// Renders a structured document into curated '#'-headed text, cleaning every
/// heading and paragraph. Headings that clean to empty are omitted; cleaned
/// paragraphs containing blank lines are split into separate blocks so blocks
/// are always separated by exactly one blank line.
pub fn normalize_structure(doc: &SourceDocument) -> CuratedDocument {
    let mut blocks: Vec<String> = Vec::new();
    for section in &doc.sections {
        let heading = collapse_inline(&clean_text(&section.heading));
        if !heading.is_empty() {
            blocks.push(format!("{} {}", "#".repeat(section.level.max(1) as usize), heading));
        }
        for para in &section.paragraphs {
            let cleaned = clean_text(para);
            for block in cleaned.split("\n\n") {
                if !block.is_empty() {
                    blocks.push(block.to_string());
                }
            }
        }
    }
    CuratedDocument {
        id: doc.id.clone(),
        metadata: DocMetadata {
            source: doc.source,
            title: doc.title.clone(),
            authors: doc.authors.clone(),
            published: doc.published.clone(),
            url: doc.url.clone(),
        },
        text: blocks.join("\n\n"),
    }
}

/// Keeps documents whose text or title contains at least one keyword,
/// case-insensitively, preserving input order.
pub fn keyword_filter(
    docs: &[CuratedDocument],
    keywords: &[String],
) -> Result<Vec<CuratedDocument>, CorpusError> {
    let needles: Vec<String> =
        keywords.iter().filter(|k| !k.trim().is_empty()).map(|k| k.to_lowercase()).collect();
    if needles.is_empty() {
        return Err(CorpusError::EmptyKeywords);
    }
    Ok(docs
        .iter()
        .filter(|d| {
            let haystack = format!("{}\n{}", d.metadata.title.to_lowercase(), d.text.to_lowercase());
            needles.iter().any(|n| haystack.contains(n))
        })
        .cloned()
        .collect())
}

/// Writes one JSON object per document per line; returns the number written.
pub fn archive_jsonl(docs: &[CuratedDocument], path: &Path) -> Result<usize, CorpusError> {
    let mut buf = String::new();
    for doc in docs {
        buf.push_str(&serde_json::to_string(doc).expect("document serializes"));
        buf.push('\n');
    }
    atomic_write(path, buf.as_bytes())?;
    Ok(docs.len())
}

/// Reads a jsonlines corpus; a malformed line fails with its 1-based number.
pub fn load_jsonl(path: &Path) -> Result<Vec<CuratedDocument>, CorpusError> {
    let content = std::fs::read_to_string(path)?;
    let mut docs = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let doc: CuratedDocument = serde_json::from_str(line)
            .map_err(|source| CorpusError::MalformedLine { line: idx + 1, source })?;
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, title: &str, sections: Vec<Section>) -> SourceDocument {
        SourceDocument {
            id: id.into(),
            source: SourceKind::Custom,
            title: title.into(),
            authors: vec![],
            published: None,
            url: None,
            sections,
        }
    }

    #[test]
    fn normalize_formats_heading_and_paragraph() {
        let d = doc(
            "d1",
            "t",
            vec![Section { level: 1, heading: "Dosing".into(), paragraphs: vec!["Take X.".into()] }],
        );
        assert_eq!(normalize_structure(&d).text, "# Dosing\n\nTake X.");
    }

    #[test]
    fn normalize_renders_levels() {
        let d = doc(
            "d1",
            "t",
            vec![
                Section { level: 1, heading: "A".into(), paragraphs: vec![] },
                Section { level: 2, heading: "B".into(), paragraphs: vec!["p".into()] },
            ],
        );
        assert_eq!(normalize_structure(&d).text, "# A\n\n## B\n\np");
    }

    #[test]
    fn normalize_empty_paragraph_list_gives_heading_only() {
        let d = doc("d1", "t", vec![Section { level: 1, heading: "Only".into(), paragraphs: vec![] }]);
        assert_eq!(normalize_structure(&d).text, "# Only");
    }

    #[test]
    fn normalize_output_is_clean_idempotent_and_valid() {
        let d = doc(
            "d1",
            "t",
            vec![Section {
                level: 1,
                heading: "See https://example.org".into(),
                paragraphs: vec!["host 10.0.0.1 down\u{0007}".into(), "  spaced   out  ".into()],
            }],
        );
        let curated = normalize_structure(&d);
        assert_eq!(clean_text(&curated.text), curated.text);
        curated.validate().unwrap();
    }

    #[test]
    fn filter_is_case_insensitive_and_order_preserving() {
        let d1 = normalize_structure(&doc(
            "d1",
            "one",
            vec![Section { level: 1, heading: "H".into(), paragraphs: vec!["colorectal cancer".into()] }],
        ));
        let d2 = normalize_structure(&doc(
            "d2",
            "two",
            vec![Section { level: 1, heading: "H".into(), paragraphs: vec!["melanoma".into()] }],
        ));
        let docs = vec![d1.clone(), d2];
        let hit = keyword_filter(&docs, &["COLORECTAL".to_string()]).unwrap();
        assert_eq!(hit, vec![d1]);
        let none = keyword_filter(&docs, &["zebrafish".to_string()]).unwrap();
        assert!(none.is_empty());
        assert!(matches!(keyword_filter(&docs, &[]), Err(CorpusError::EmptyKeywords)));
    }

    #[test]
    fn filter_matches_title_too() {
        let d = normalize_structure(&doc(
            "d1",
            "Colorectal guideline",
            vec![Section { level: 1, heading: "H".into(), paragraphs: vec!["body".into()] }],
        ));
        let hit = keyword_filter(std::slice::from_ref(&d), &["colorectal".to_string()]).unwrap();
        assert_eq!(hit.len(), 1);
    }

    #[test]
    fn jsonl_round_trip_and_line_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let docs: Vec<CuratedDocument> = (0..3)
            .map(|i| {
                normalize_structure(&doc(
                    &format!("d{i}"),
                    &format!("title {i}"),
                    vec![Section {
                        level: 1,
                        heading: format!("H{i}"),
                        paragraphs: vec![format!("para {i}")],
                    }],
                ))
            })
            .collect();
        assert_eq!(archive_jsonl(&docs, &path).unwrap(), 3);
        assert_eq!(load_jsonl(&path).unwrap(), docs);

        let empty: Vec<CuratedDocument> = vec![];
        archive_jsonl(&empty, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        assert!(load_jsonl(&path).unwrap().is_empty());

        std::fs::write(&path, "{\"id\":\"a\",\"metadata\":{\"source\":\"custom\",\"title\":\"t\"},\"text\":\"x\"}\nnot json\n").unwrap();
        match load_jsonl(&path).unwrap_err() {
            CorpusError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    prop_compose! {
        fn arb_clean_word()(w in "[a-zA-Z][a-zA-Z0-9]{0,8}") -> String { w }
    }

    prop_compose! {
        fn arb_paragraph()(words in prop::collection::vec(arb_clean_word(), 1..12)) -> String {
            words.join(" ")
        }
    }

    prop_compose! {
        fn arb_section()(
            level in 1u32..4,
            heading in arb_paragraph(),
            paragraphs in prop::collection::vec(arb_paragraph(), 0..4),
        ) -> Section {
            Section { level, heading, paragraphs }
        }
    }

    proptest! {
        #[test]
        fn clean_text_is_idempotent(raw in "\\PC{0,200}") {
            let once = clean_text(&raw);
            prop_assert_eq!(clean_text(&once), once.clone());
            prop_assert!(!text::has_removable_patterns(&once));
        }

        #[test]
        fn normalize_is_clean_fixed_point(sections in prop::collection::vec(arb_section(), 0..6)) {
            let d = doc("p1", "t", sections);
            let curated = normalize_structure(&d);
            prop_assert_eq!(clean_text(&curated.text), curated.text.clone());
            prop_assert!(curated.validate().is_ok());
        }

        #[test]
        fn structured_text_round_trips_section_tree(sections in prop::collection::vec(arb_section(), 1..6)) {
            let d = doc("p1", "t", sections.clone());
            let curated = normalize_structure(&d);
            let reparsed = parse_structured_text(&curated.text);
            prop_assert_eq!(reparsed, sections);
        }

        #[test]
        fn filter_subset_order_and_idempotence(
            bodies in prop::collection::vec(arb_paragraph(), 0..8),
            kw in arb_clean_word(),
        ) {
            let docs: Vec<CuratedDocument> = bodies.iter().enumerate().map(|(i, b)| {
                normalize_structure(&doc(
                    &format!("d{i}"),
                    "t",
                    vec![Section { level: 1, heading: "H".into(), paragraphs: vec![b.clone()] }],
                ))
            }).collect();
            let kws = vec![kw];
            let once = keyword_filter(&docs, &kws).unwrap();
            // subset, order preserved (positions strictly increase)
            let mut prev: Option<usize> = None;
            for kept in &once {
                let pos = docs.iter().position(|d| d.id == kept.id).unwrap();
                prop_assert!(prev.is_none_or(|p| pos > p));
                prev = Some(pos);
            }
            // idempotent
            let twice = keyword_filter(&once, &kws).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn jsonl_round_trip_identity(n in 0usize..20) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("c.jsonl");
            let docs: Vec<CuratedDocument> = (0..n).map(|i| normalize_structure(&doc(
                &format!("d{i}"),
                &format!("t{i}"),
                vec![Section { level: 1, heading: format!("H{i}"), paragraphs: vec![format!("p {i}")] }],
            ))).collect();
            archive_jsonl(&docs, &path).unwrap();
            prop_assert_eq!(load_jsonl(&path).unwrap(), docs);
        }
    }
}
