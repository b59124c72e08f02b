//! Release gate: one test per shipping criterion. Each test prints an
//! "ACCEPT <name>: PASS" line when its criterion holds; runtime bounds are
//! asserted with wall-clock measurements around the work.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oncoagent::agent::{RunStatus, Transcript, Verdict};
use oncoagent::corpus::{
    archive_jsonl, clean_text, load_jsonl, normalize_structure, CuratedDocument, DocMetadata,
    Section, SourceDocument, SourceKind,
};
use oncoagent::eval::{
    majority_vote, CitationLabel, MetricsReport, Ratio, StatementLabel, ANSWERED_HIERARCHY,
    CITATION_HIERARCHY, STATEMENT_HIERARCHY,
};
use oncoagent::index::{
    chunk_document, cosine_similarity, tokenize_with_spans, Chunk, EmbeddingProvider,
    MockEmbedder, VectorIndex,
};
use oncoagent::provider::{TEMPLATE_CITED_RESPONSE, TEMPLATE_PLAN_ACTIONS};
use oncoagent::retrieval::{
    run_retrieval, IndexSource, Reranker, RetrievalConfig, Subquery, SubqueryOrigin,
};

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().unwrap()
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oncoagent"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn cli_text(out: &Output) -> String {
    format!(
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn assert_within(elapsed: Duration, bound: Duration, what: &str) {
    assert!(elapsed <= bound, "{what} took {elapsed:?}, budget is {bound:?}");
}

fn ratio(numerator: u64, denominator: u64, percent: &str) -> Ratio {
    Ratio { numerator, denominator, percent: percent.to_string() }
}

#[test]
fn metrics_reproduction_on_packaged_annotations() {
    let annotations = fixtures_dir().join("annotations");
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");

    let started = Instant::now();
    let out = cli(&[
        "eval",
        "compute",
        "--annotations",
        annotations.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    let elapsed = started.elapsed();
    assert!(out.status.success(), "{}", cli_text(&out));
    assert_within(elapsed, Duration::from_secs(1), "eval compute");

    let report: MetricsReport =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.cases, 11);
    assert_eq!(report.raters, 4);
    assert_eq!(report.tool_use, ratio(32, 33, "97.0"));
    assert_eq!(report.completeness, ratio(63, 67, "94.0"));
    assert_eq!(report.helpfulness, ratio(33, 37, "89.2"));
    assert_eq!(report.statements.total, 140);
    assert_eq!(report.statements.correct, ratio(131, 140, "93.6"));
    assert_eq!(report.statements.wrong, ratio(6, 140, "4.3"));
    assert_eq!(report.statements.harmful, ratio(3, 140, "2.1"));
    assert_eq!(report.citations.provided, 171);
    assert_eq!(report.citations.labeled, 155);
    assert_eq!(report.citations.correct, ratio(141, 171, "82.5"));
    assert_eq!(report.citations.irrelevant, ratio(11, 171, "6.4"));
    assert_eq!(report.citations.wrong, ratio(3, 171, "1.8"));

    println!("ACCEPT metrics_reproduction: PASS");
}

/// Independent stride walk: emit [offset, min(offset+window, len)) for
/// offsets 0, stride, 2*stride, ... while each window adds a new token.
fn stride_spans(len: usize, window: usize, overlap: usize) -> Vec<(usize, usize)> {
    let stride = window - overlap;
    let mut spans = Vec::new();
    let mut offset = 0;
    let mut covered = 0;
    while offset < len {
        let end = (offset + window).min(len);
        if !spans.is_empty() && end <= covered {
            break;
        }
        spans.push((offset, end - offset));
        covered = end;
        offset += stride;
    }
    spans
}

fn random_document(rng: &mut ChaCha8Rng, id: usize, tokens: usize) -> CuratedDocument {
    let mut words = Vec::with_capacity(tokens);
    for _ in 0..tokens {
        let w = rng.random_range(0u32..5000);
        words.push(format!("tok{w}"));
    }
    CuratedDocument {
        id: format!("doc-{id:03}"),
        metadata: DocMetadata {
            source: SourceKind::Custom,
            title: format!("generated {id}"),
            authors: vec![],
            published: None,
            url: None,
        },
        text: words.join(" "),
    }
}

#[test]
fn chunker_matches_brute_force_enumerator() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let windows = [512usize, 256, 128];
    let overlap = 50;

    let started = Instant::now();
    for id in 0..200 {
        let tokens = rng.random_range(1usize..=5000);
        let doc = random_document(&mut rng, id, tokens);
        let total = tokenize_with_spans(&doc.text).len();
        assert_eq!(total, tokens);

        let chunks = chunk_document(&doc, &windows, overlap).unwrap();
        for &window in &windows {
            let got: Vec<(usize, usize)> = chunks
                .iter()
                .filter(|c| c.window == window)
                .map(|c| (c.token_start, c.token_len))
                .collect();
            let want = stride_spans(total, window, overlap);
            assert_eq!(got, want, "doc {id} window {window}");

            let mut seen = vec![false; total];
            for (start, len) in &got {
                for flag in seen.iter_mut().skip(*start).take(*len) {
                    *flag = true;
                }
            }
            assert!(seen.into_iter().all(|covered| covered), "doc {id} window {window} gap");
        }
    }
    assert_within(started.elapsed(), Duration::from_secs(10), "chunker sweep");

    println!("ACCEPT chunker_oracle: PASS");
}

fn synthetic_chunk(i: usize, text: String) -> Chunk {
    Chunk {
        doc_id: format!("d{:02}", i / 50),
        chunk_id: format!("c{i:04}"),
        window: 128,
        token_start: i,
        token_len: 1,
        text,
        metadata: BTreeMap::new(),
    }
}

fn word_salad(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| format!("w{}", rng.random_range(0u32..800))).collect::<Vec<_>>().join(" ")
}

/// Dedup key reimplemented from its definition: lowercase, whitespace runs
/// collapsed to single spaces, edges trimmed.
fn dedup_key(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn brute_force_top(
    query: &[f32],
    vectors: &[(String, Vec<f32>)],
    n: usize,
) -> Vec<(String, f32)> {
    let mut scored: Vec<(String, f32)> =
        vectors.iter().map(|(id, v)| (id.clone(), cosine_similarity(query, v))).collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(n);
    scored
}

#[test]
fn retrieval_matches_brute_force_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let embedder: Arc<dyn EmbeddingProvider> = Arc::new(MockEmbedder::new(64));

    let mut texts: Vec<String> = Vec::with_capacity(1000);
    for i in 0..1000usize {
        // every 20th passage repeats an earlier text so dedup has real work
        if i % 20 == 7 && i >= 20 {
            texts.push(texts[i - 20].clone());
        } else {
            texts.push(format!("passage {i} {}", word_salad(&mut rng, 12)));
        }
    }
    let vectors_matrix = embedder.embed(&texts).unwrap();
    let mut index = VectorIndex::new(64);
    let mut vectors: Vec<(String, Vec<f32>)> = Vec::with_capacity(1000);
    for (i, (text, vector)) in texts.iter().zip(vectors_matrix).enumerate() {
        let chunk = synthetic_chunk(i, text.clone());
        index.insert(chunk, vector.clone()).unwrap();
        vectors.push((format!("c{i:04}"), vector));
    }
    let index = Arc::new(index);

    let queries: Vec<String> = (0..100).map(|_| word_salad(&mut rng, 6)).collect();
    let query_vectors = embedder.embed(&queries).unwrap();

    let started = Instant::now();
    for (query, qv) in queries.iter().zip(&query_vectors) {
        let hits = index.search(qv, 10, None).unwrap();
        let want = brute_force_top(qv, &vectors, 10);
        assert_eq!(hits.len(), want.len(), "query {query}");
        for (hit, (id, score)) in hits.iter().zip(&want) {
            assert_eq!(&hit.chunk_id, id, "query {query}");
            assert_eq!(hit.score, *score, "query {query} chunk {id}");
        }
    }

    let config = RetrievalConfig {
        n: 40,
        k: 10,
        max_subqueries: 12,
        reranker: oncoagent::retrieval::RerankerKind::Cosine,
    };
    let source = IndexSource::new(index.clone(), embedder.clone());
    for group in queries.chunks(4) {
        let subqueries: Vec<Subquery> = group
            .iter()
            .map(|text| Subquery { text: text.clone(), origin: SubqueryOrigin::Manual })
            .collect();
        let (context, per_subquery) =
            run_retrieval(&source, &subqueries, &config, &Reranker::Cosine).unwrap();

        // oracle: per subquery exhaustive top-40, cosine rerank keeps order,
        // cut to 10, then merge in order with text dedup and 1-based numbers
        let mut oracle_lists: Vec<Vec<(String, f32)>> = Vec::new();
        for (sq, qv) in group.iter().zip(embedder.embed(group).unwrap()) {
            let mut list = brute_force_top(&qv, &vectors, 40);
            list.truncate(10);
            assert_eq!(per_subquery[oracle_lists.len()].len(), list.len(), "subquery {sq}");
            for (got, want) in per_subquery[oracle_lists.len()].iter().zip(&list) {
                assert_eq!(got.chunk_id, want.0, "subquery {sq}");
                assert_eq!(got.retrieval_score, want.1, "subquery {sq}");
                assert_eq!(got.rerank_score, want.1, "subquery {sq}");
            }
            oracle_lists.push(list);
        }

        let mut seen = HashSet::new();
        let mut expected: Vec<(usize, String)> = Vec::new();
        for list in &oracle_lists {
            for (chunk_id, _) in list {
                let text = &index.chunk(chunk_id).unwrap().text;
                if seen.insert(dedup_key(text)) {
                    expected.push((expected.len() + 1, chunk_id.clone()));
                }
            }
        }
        let got: Vec<(usize, String)> =
            context.sources.iter().map(|s| (s.number, s.chunk_id.clone())).collect();
        assert_eq!(got, expected);
    }
    assert_within(started.elapsed(), Duration::from_secs(30), "retrieval sweep");

    println!("ACCEPT retrieval_oracle: PASS");
}

fn build_golden_index(dir: &Path) -> PathBuf {
    let corpus = fixtures_dir().join("golden/corpus.jsonl");
    let index_path = dir.join("index.json");
    let out = cli(&[
        "index",
        "build",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        index_path.to_str().unwrap(),
        "--offline",
    ]);
    assert!(out.status.success(), "{}", cli_text(&out));
    index_path
}

fn run_agent(case: &Path, index: &Path, config: &Path, out_path: &Path) -> Output {
    cli(&[
        "agent",
        "run",
        "--case",
        case.to_str().unwrap(),
        "--index",
        index.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--offline",
        "--out",
        out_path.to_str().unwrap(),
    ])
}

/// Every cited source number must resolve to a stored chunk: either a chunk
/// of the persisted corpus index with identical text, or a chunk of an index
/// a tool created during the run, whose document the tool output names.
fn assert_citation_provenance(transcript: &Transcript, index: &VectorIndex) {
    let mut tool_doc_ids: HashSet<String> = HashSet::new();
    for result in &transcript.tool_results {
        if let Some(output) = &result.output {
            if let Some(results) = output.get("results").and_then(|v| v.as_array()) {
                for item in results {
                    if let Some(pmid) = item.get("pmid").and_then(|v| v.as_str()) {
                        tool_doc_ids.insert(format!("pubmed-{pmid}"));
                    }
                }
            }
        }
    }

    let mut cited = 0usize;
    for statement in &transcript.statements {
        for &number in &statement.citations {
            cited += 1;
            let source = transcript
                .sources
                .get(number - 1)
                .unwrap_or_else(|| panic!("citation {number} has no source"));
            assert_eq!(source.number, number);
            match index.chunk(&source.chunk_id) {
                Some(chunk) => assert_eq!(chunk.text, source.text, "chunk {}", source.chunk_id),
                None => {
                    let doc_id = source.chunk_id.split(':').next().unwrap();
                    assert!(
                        tool_doc_ids.contains(doc_id),
                        "chunk {} is neither in the corpus index nor tool-created",
                        source.chunk_id
                    );
                }
            }
        }
    }
    assert!(cited >= 3, "golden response should cite at least three sources, cited {cited}");
}

#[test]
fn golden_offline_run_is_deterministic_and_cited() {
    let golden = fixtures_dir().join("golden");
    let dir = tempfile::tempdir().unwrap();

    let started = Instant::now();
    let index_path = build_golden_index(dir.path());

    let mut normalized = Vec::new();
    let mut first: Option<Transcript> = None;
    for i in 0..3 {
        let out_path = dir.path().join(format!("run-{i}.json"));
        let out = run_agent(
            &golden.join("case.json"),
            &index_path,
            &golden.join("config.toml"),
            &out_path,
        );
        assert!(out.status.success(), "{}", cli_text(&out));
        let transcript = Transcript::load(&out_path).unwrap();
        normalized.push(serde_json::to_string(&transcript.normalized()).unwrap());
        if first.is_none() {
            first = Some(transcript);
        }
    }
    assert_eq!(normalized[0], normalized[1], "run 0 and 1 differ beyond timestamps");
    assert_eq!(normalized[1], normalized[2], "run 1 and 2 differ beyond timestamps");

    let transcript = first.unwrap();
    assert_eq!(transcript.status, RunStatus::Ok);
    assert_eq!(transcript.plan.len(), 8);
    assert!(transcript.tool_results.iter().all(|r| r.error.is_none()));

    let growth = transcript
        .tool_results
        .iter()
        .find(|r| r.tool == "calculator")
        .and_then(|r| r.output.as_ref())
        .and_then(|o| o.get("value"))
        .and_then(|v| v.as_f64())
        .expect("calculator produced a value");
    assert!((growth - 3.89).abs() <= 0.01, "area ratio {growth} outside 3.89 +/- 0.01");

    let index = VectorIndex::load(&index_path).unwrap();
    assert_citation_provenance(&transcript, &index);
    assert!(transcript
        .verdicts
        .iter()
        .all(|v| matches!(v.verdict, Verdict::Supported | Verdict::Uncited)));

    let replay = cli(&["agent", "replay", "--transcript", dir.path().join("run-0.json").to_str().unwrap()]);
    assert!(replay.status.success(), "{}", cli_text(&replay));

    assert_within(started.elapsed(), Duration::from_secs(10), "golden runs");

    println!("ACCEPT golden_run: PASS");
}

#[test]
fn oversized_cyclic_and_refused_plans_are_contained() {
    let policy = fixtures_dir().join("policy");
    let dir = tempfile::tempdir().unwrap();
    let index_path = build_golden_index(dir.path());

    let cap_out = dir.path().join("cap.json");
    let out = run_agent(
        &policy.join("case-eleven-calls.json"),
        &index_path,
        &policy.join("policy-config.toml"),
        &cap_out,
    );
    assert_eq!(out.status.code(), Some(1), "{}", cli_text(&out));
    let transcript = Transcript::load(&cap_out).unwrap();
    assert_eq!(transcript.status, RunStatus::Error);
    assert!(transcript.tool_results.is_empty(), "no call may execute under an oversized plan");
    let error = transcript.error.unwrap();
    assert!(error.contains("plan has 11 calls") && error.contains("maximum"), "{error}");

    let cycle_out = dir.path().join("cycle.json");
    let out = run_agent(
        &policy.join("case-cycle.json"),
        &index_path,
        &policy.join("policy-config.toml"),
        &cycle_out,
    );
    assert_eq!(out.status.code(), Some(1), "{}", cli_text(&out));
    let transcript = Transcript::load(&cycle_out).unwrap();
    assert_eq!(transcript.status, RunStatus::Error);
    assert!(transcript.tool_results.is_empty());
    let error = transcript.error.unwrap();
    assert!(error.contains("dependency cycle"), "{error}");

    let refusal_out = dir.path().join("refusal.json");
    let out = run_agent(
        &policy.join("case-refusal.json"),
        &index_path,
        &policy.join("refusal-config.toml"),
        &refusal_out,
    );
    assert_eq!(out.status.code(), Some(1), "{}", cli_text(&out));
    let transcript = Transcript::load(&refusal_out).unwrap();
    assert_eq!(transcript.status, RunStatus::Refused);
    assert_eq!(transcript.max_attempts, 2);
    assert_eq!(transcript.attempt, 2, "the single retry must be consumed");
    assert!(transcript.error.unwrap().contains("refused"));

    println!("ACCEPT plan_policies: PASS");
}

#[test]
fn citation_repair_invokes_generator_exactly_twice() {
    let golden = fixtures_dir().join("golden");
    let dir = tempfile::tempdir().unwrap();
    let index_path = build_golden_index(dir.path());

    let out_path = dir.path().join("selfcheck.json");
    let out = run_agent(
        &golden.join("case.json"),
        &index_path,
        &golden.join("config-selfcheck.toml"),
        &out_path,
    );
    assert!(out.status.success(), "{}", cli_text(&out));

    let transcript = Transcript::load(&out_path).unwrap();
    assert_eq!(transcript.status, RunStatus::Ok);
    assert!(transcript.repaired);
    let flagged = transcript
        .initial_verdicts
        .iter()
        .filter(|v| matches!(v.verdict, Verdict::Unsupported))
        .count();
    assert_eq!(flagged, 1, "the scripted checker flags exactly one pair");
    assert!(transcript
        .verdicts
        .iter()
        .all(|v| matches!(v.verdict, Verdict::Supported | Verdict::Uncited)));

    let generator_calls = transcript
        .provider_calls
        .iter()
        .filter(|c| c.template_id == TEMPLATE_CITED_RESPONSE)
        .count();
    assert_eq!(generator_calls, 2, "one generation plus exactly one repair");

    println!("ACCEPT self_check_bound: PASS");
}

/// Reference vote: count each hierarchy label, then take the highest count,
/// resolving count ties to the label latest in the hierarchy (most adverse).
fn reference_vote<L: Copy + PartialEq>(labels: &[L], hierarchy: &[L]) -> L {
    let counts: Vec<usize> = hierarchy
        .iter()
        .map(|h| labels.iter().filter(|l| *l == h).count())
        .collect();
    let top = *counts.iter().max().unwrap();
    let winner = counts.iter().enumerate().filter(|(_, c)| **c == top).map(|(i, _)| i).max();
    hierarchy[winner.unwrap()]
}

fn permutations4(items: [usize; 4]) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            if b == a {
                continue;
            }
            for c in 0..4 {
                if c == a || c == b {
                    continue;
                }
                let d = 6 - a - b - c;
                out.push([items[a], items[b], items[c], items[d]]);
            }
        }
    }
    out
}

fn exhaustive_vote_check<L: Copy + PartialEq + std::fmt::Debug>(hierarchy: &[L]) {
    let arity = hierarchy.len();
    for code in 0..arity.pow(4) {
        let mut rest = code;
        let mut picks = [0usize; 4];
        for slot in &mut picks {
            *slot = rest % arity;
            rest /= arity;
        }
        let labels: Vec<L> = picks.iter().map(|&i| hierarchy[i]).collect();
        let want = reference_vote(&labels, hierarchy);
        let got = majority_vote(&labels, hierarchy).unwrap();
        assert_eq!(got, want, "labels {labels:?}");

        for perm in permutations4(picks) {
            let shuffled: Vec<L> = perm.iter().map(|&i| hierarchy[i]).collect();
            assert_eq!(
                majority_vote(&shuffled, hierarchy).unwrap(),
                want,
                "permutation changed the vote for {labels:?}"
            );
        }

        if picks.iter().all(|&i| i == picks[0]) {
            assert_eq!(got, hierarchy[picks[0]], "unanimity must return the label itself");
        }
    }
}

#[test]
fn majority_vote_exhaustive_properties() {
    let started = Instant::now();
    exhaustive_vote_check(&STATEMENT_HIERARCHY);
    exhaustive_vote_check(&CITATION_HIERARCHY);
    exhaustive_vote_check(&ANSWERED_HIERARCHY);

    // 2-2 splits resolve to the adverse side
    use CitationLabel::{Correct as CCorrect, Irrelevant};
    use StatementLabel::{Correct, Harmful, Wrong};
    assert_eq!(
        majority_vote(&[CCorrect, CCorrect, Irrelevant, Irrelevant], &CITATION_HIERARCHY).unwrap(),
        Irrelevant
    );
    assert_eq!(
        majority_vote(&[Correct, Correct, Wrong, Wrong], &STATEMENT_HIERARCHY).unwrap(),
        Wrong
    );
    assert_eq!(
        majority_vote(&[Wrong, Wrong, Harmful, Harmful], &STATEMENT_HIERARCHY).unwrap(),
        Harmful
    );
    assert_within(started.elapsed(), Duration::from_secs(1), "vote enumeration");

    println!("ACCEPT majority_vote_properties: PASS");
}

fn messy_source_document(rng: &mut ChaCha8Rng, id: usize) -> SourceDocument {
    let kinds = [
        SourceKind::Mdcalc,
        SourceKind::Uptodate,
        SourceKind::Meditron,
        SourceKind::Asco,
        SourceKind::Esmo,
        SourceKind::Onkopedia,
        SourceKind::Custom,
    ];
    let mut sections = Vec::new();
    for s in 0..rng.random_range(1usize..4) {
        let mut paragraphs = Vec::new();
        for p in 0..rng.random_range(1usize..4) {
            let mut text = format!("paragraph {p} with  double  spaces\tand tab");
            if rng.random_bool(0.4) {
                text.push_str(" see https://example.org/x and www.example.net/page");
            }
            if rng.random_bool(0.3) {
                text.push_str(" host 10.0.0.1 responded");
            }
            if rng.random_bool(0.3) {
                text.push_str(" bell\u{7}char");
            }
            if rng.random_bool(0.3) {
                text.push_str("\n\n\nsplit block");
            }
            paragraphs.push(text);
        }
        sections.push(Section {
            level: rng.random_range(1u32..4),
            heading: if rng.random_bool(0.2) {
                "   ".to_string()
            } else {
                format!("Heading  {s}\twith gaps")
            },
            paragraphs,
        });
    }
    SourceDocument {
        id: format!("src-{id:03}"),
        source: kinds[id % kinds.len()],
        title: format!("Messy   document {id}"),
        authors: vec!["A. Uthor".to_string()],
        published: Some("2024-01-01".to_string()),
        url: Some(format!("https://example.org/{id}")),
        sections,
    }
}

#[test]
fn corpus_round_trip_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let dir = tempfile::tempdir().unwrap();

    // archive and reload 100 generated documents without loss
    let docs: Vec<CuratedDocument> = (0..100)
        .map(|id| {
            let tokens = rng.random_range(5usize..400);
            let mut doc = random_document(&mut rng, id, tokens);
            doc.metadata.source = if id % 3 == 0 { SourceKind::Esmo } else { SourceKind::Custom };
            doc.metadata.authors = vec![format!("author {id}")];
            if id % 2 == 0 {
                doc.metadata.published = Some(format!("20{:02}-06-01", id % 30));
            }
            doc.text = format!("# Heading {id}\n\n{}", doc.text);
            doc
        })
        .collect();
    let archive = dir.path().join("corpus.jsonl");
    let written = archive_jsonl(&docs, &archive).unwrap();
    assert_eq!(written, 100);
    let loaded = load_jsonl(&archive).unwrap();
    assert_eq!(loaded, docs);

    // structured normalization output is already clean text
    for id in 0..100 {
        let source = messy_source_document(&mut rng, id);
        let curated = normalize_structure(&source);
        curated.validate().unwrap();
        assert_eq!(
            clean_text(&curated.text),
            curated.text,
            "cleaning normalized output must be a no-op for {}",
            source.id
        );
    }

    // the command-line ingest of each source format reloads identically
    let src = fixtures_dir().join("corpus-src");
    for (sub, format) in [("tei", "tei"), ("text", "text"), ("jsonl", "jsonl")] {
        let out_path = dir.path().join(format!("{sub}.jsonl"));
        let out = cli(&[
            "corpus",
            "ingest",
            "--in",
            src.join(sub).to_str().unwrap(),
            "--format",
            format,
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", cli_text(&out));
        let ingested = load_jsonl(&out_path).unwrap();
        assert!(!ingested.is_empty());
        for doc in &ingested {
            doc.validate().unwrap();
        }
        let rearchive = dir.path().join(format!("{sub}-2.jsonl"));
        archive_jsonl(&ingested, &rearchive).unwrap();
        assert_eq!(load_jsonl(&rearchive).unwrap(), ingested);
    }

    println!("ACCEPT corpus_round_trips: PASS");
}

#[test]
fn forced_plans_skip_generation_but_not_validation() {
    let policy = fixtures_dir().join("policy");
    let dir = tempfile::tempdir().unwrap();
    let index_path = build_golden_index(dir.path());

    let out_path = dir.path().join("refusal.json");
    let out = run_agent(
        &policy.join("case-refusal.json"),
        &index_path,
        &policy.join("refusal-config.toml"),
        &out_path,
    );
    assert_eq!(out.status.code(), Some(1), "{}", cli_text(&out));
    let transcript = Transcript::load(&out_path).unwrap();
    assert!(
        transcript.provider_calls.iter().all(|c| c.template_id != TEMPLATE_PLAN_ACTIONS),
        "a forced plan must not consult the planner"
    );
    assert_eq!(transcript.plan.len(), 1);

    println!("ACCEPT forced_plan_bypass: PASS");
}
