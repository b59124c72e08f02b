//! C ABI over the engine: opaque handles for corpora, indexes, and
//! transcripts, status-code returns with a thread-local error message, and
//! UTF-8 strings passed as NUL-terminated `char*`. Every returned string is
//! owned by the caller and must be released with `oa_string_free`; every
//! handle has a matching `_free`. The generated header lands in
//! `include/oncoagent.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use oncoagent::agent::{load_case, replay_transcript, run_case, RunStatus, Transcript};
use oncoagent::config::{build_engine, load_config};
use oncoagent::corpus::{load_jsonl, CuratedDocument};
use oncoagent::eval::{compute_metrics, load_annotations};
use oncoagent::index::{MockEmbedder, VectorIndex, DEFAULT_OVERLAP, DEFAULT_WINDOWS};
use oncoagent::transport::HttpTransport;

/// Result code of every fallible call. Anything other than `Ok` leaves a
/// human-readable explanation readable via `oa_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Malformed = 5,
    Runtime = 6,
    Panic = 7,
}

/// Terminal state of a stored run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OaRunStatus {
    Ok = 0,
    Refused = 1,
    Error = 2,
}

/// A loaded jsonlines corpus. Create with `oa_corpus_load`, release with
/// `oa_corpus_free`.
pub struct OaCorpus {
    docs: Vec<CuratedDocument>,
}

/// An embedded chunk index. Create with `oa_index_build` or `oa_index_load`,
/// release with `oa_index_free`.
pub struct OaIndex {
    index: VectorIndex,
}

/// A recorded case run. Create with `oa_run_case` or `oa_transcript_load`,
/// release with `oa_transcript_free`.
pub struct OaTranscript {
    transcript: Transcript,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: OaStatus, message: impl std::fmt::Display) -> OaStatus {
    let sanitized = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL stripped above");
    });
    status
}

fn guard(body: impl FnOnce() -> OaStatus) -> OaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(OaStatus::Panic, format!("library panic: {message}"))
        }
    }
}

/// # Safety
/// `ptr` must be NUL-terminated and valid for reads, per the caller contract
/// of every `const char*` parameter below.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, OaStatus> {
    if ptr.is_null() {
        return Err(fail(OaStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| fail(OaStatus::InvalidUtf8, format!("{name} is not UTF-8: {e}")))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, OaStatus> {
    if ptr.is_null() {
        return Err(fail(OaStatus::NullPointer, format!("{name} is null")));
    }
    Ok(&mut *ptr)
}

unsafe fn handle_arg<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, OaStatus> {
    if ptr.is_null() {
        return Err(fail(OaStatus::NullPointer, format!("{name} is null")));
    }
    Ok(&*ptr)
}

fn give_string(text: String, out: &mut *mut c_char) -> OaStatus {
    match CString::new(text.replace('\0', " ")) {
        Ok(c) => {
            *out = c.into_raw();
            OaStatus::Ok
        }
        Err(e) => fail(OaStatus::Runtime, format!("cannot export string: {e}")),
    }
}

/// Library version as a static string. Do not free.
#[no_mangle]
pub extern "C" fn oa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn oa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library. A null pointer is ignored.
///
/// # Safety
/// `s` must have been returned by a function of this library and not freed
/// before.
#[no_mangle]
pub unsafe extern "C" fn oa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a jsonlines corpus file into a handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn oa_corpus_load(
    path: *const c_char,
    out: *mut *mut OaCorpus,
) -> OaStatus {
    guard(|| {
        let out = match out_arg(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let path = match utf8_arg(path, "path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match load_jsonl(Path::new(path)) {
            Ok(docs) => {
                *out = Box::into_raw(Box::new(OaCorpus { docs }));
                OaStatus::Ok
            }
            Err(e) => fail(OaStatus::Malformed, format!("cannot load corpus {path}: {e}")),
        }
    })
}

/// Number of documents in the corpus.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oa_corpus_len(corpus: *const OaCorpus, out: *mut usize) -> OaStatus {
    guard(|| {
        let out = match out_arg(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match handle_arg(corpus, "corpus") {
            Ok(c) => {
                *out = c.docs.len();
                OaStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Releases a corpus handle. A null pointer is ignored.
///
/// # Safety
/// `corpus` must have come from `oa_corpus_load` and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn oa_corpus_free(corpus: *mut OaCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Chunks and embeds a corpus into an index with the deterministic local
/// embedder at the given dimension, using the standard window sizes.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oa_index_build(
    corpus: *const OaCorpus,
    dimension: usize,
    out: *mut *mut OaIndex,
) -> OaStatus {
    guard(|| {
        let out = match out_arg(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let corpus = match handle_arg(corpus, "corpus") {
            Ok(v) => v,
            Err(s) => return s,
        };
        if dimension == 0 {
            return fail(OaStatus::InvalidArgument, "dimension must be at least 1");
        }
        let embedder = MockEmbedder::new(dimension);
        match VectorIndex::build(&corpus.docs, &DEFAULT_WINDOWS, DEFAULT_OVERLAP, &embedder) {
            Ok(index) => {
                *out = Box::into_raw(Box::new(OaIndex { index }));
                OaStatus::Ok
            }
            Err(e) => fail(OaStatus::Runtime, format!("cannot build index: {e}")),
        }
    })
}

/// Loads a persisted index file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn oa_index_load(path: *const c_char, out: *mut *mut OaIndex) -> OaStatus {
    guard(|| {
        let out = match out_arg(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let path = match utf8_arg(path, "path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match VectorIndex::load(Path::new(path)) {
            Ok(index) => {
                *out = Box::into_raw(Box::new(OaIndex { index }));
                OaStatus::Ok
            }
            Err(e) => fail(OaStatus::Malformed, format!("cannot load index {path}: {e}")),
        }
    })
}

/// Persists an index to a file, atomically.
///
/// # Safety
/// `index` must be a live handle; `path` must be a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn oa_index_save(index: *const OaIndex, path: *const c_char) -> OaStatus {
    guard(|| {
        let index = match handle_arg(index, "index") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let path = match utf8_arg(path, "path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match index.index.persist(Path::new(path)) {
            Ok(()) => OaStatus::Ok,
            Err(e) => fail(OaStatus::Io, format!("cannot save index {path}: {e}")),
        }
    })
}

/// Number of embedded chunks in the index.
///
/// # Safety
/// `index` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oa_index_len(index: *const OaIndex, out: *mut usize) -> OaStatus {
    guard(|| {
        let out = match out_arg(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match handle_arg(index, "index") {
            Ok(i) => {
                *out = i.index.len();
                OaStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Ranks the index against a query embedded with the deterministic local
/// embedder and writes a JSON array of {chunk_id, score, text} objects.
///
/// # Safety
/// `index` must be a live handle; `query` must be a valid NUL-terminated
/// string; `out_json` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oa_index_search(
    index: *const OaIndex,
    query: *const c_char,
    top_n: usize,
    out_json: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let out = match out_arg(out_json, "out_json") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let index = match handle_arg(index, "index") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let query = match utf8_arg(query, "query") {
            Ok(v) => v,
            Err(s) => return s,
        };
        if top_n == 0 {
            return fail(OaStatus::InvalidArgument, "top_n must be at least 1");
        }
        if index.index.dimension() == 0 {
            return fail(OaStatus::InvalidArgument, "index has dimension 0");
        }
        let embedder = MockEmbedder::new(index.index.dimension());
        let vector = match oncoagent::index::EmbeddingProvider::embed(
            &embedder,
            std::slice::from_ref(&query.to_string()),
        ) {
            Ok(mut vs) => vs.remove(0),
            Err(e) => return fail(OaStatus::Runtime, format!("cannot embed query: {e}")),
        };
        match index.index.search(&vector, top_n, None) {
            Ok(hits) => {
                let rows: Vec<serde_json::Value> = hits
                    .iter()
                    .map(|h| {
                        let text = index
                            .index
                            .chunk(&h.chunk_id)
                            .map(|c| c.text.clone())
                            .unwrap_or_default();
                        serde_json::json!({
                            "chunk_id": h.chunk_id,
                            "score": h.score,
                            "text": text,
                        })
                    })
                    .collect();
                give_string(serde_json::to_string(&rows).expect("rows serialize"), out)
            }
            Err(e) => fail(OaStatus::Runtime, format!("search failed: {e}")),
        }
    })
}

/// Releases an index handle. A null pointer is ignored.
///
/// # Safety
/// `index` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn oa_index_free(index: *mut OaIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Runs one case through the full pipeline and returns the transcript
/// handle. Paths in the case file resolve against the case file's directory.
/// With `offline` set, every remote component is replaced by its
/// deterministic mock and the network is never touched. The run itself never
/// fails this call: refusals and stage errors are recorded in the
/// transcript's status.
///
/// # Safety
/// The three paths must be valid NUL-terminated strings; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn oa_run_case(
    config_path: *const c_char,
    case_path: *const c_char,
    index_path: *const c_char,
    offline: bool,
    out: *mut *mut OaTranscript,
) -> OaStatus {
    guard(|| {
        let out = match out_arg(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let config_path = match utf8_arg(config_path, "config_path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let case_path = match utf8_arg(case_path, "case_path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let index_path = match utf8_arg(index_path, "index_path") {
            Ok(v) => v,
            Err(s) => return s,
        };

        let config = match load_config(Path::new(config_path)) {
            Ok(c) => c,
            Err(e) => return fail(OaStatus::Malformed, format!("config: {e}")),
        };
        let case = match load_case(Path::new(case_path)) {
            Ok(c) => c,
            Err(e) => return fail(OaStatus::Malformed, format!("case: {e}")),
        };
        let index = match VectorIndex::load(Path::new(index_path)) {
            Ok(i) => i,
            Err(e) => return fail(OaStatus::Malformed, format!("index: {e}")),
        };
        let case_dir = Path::new(case_path)
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let transport = Arc::new(HttpTransport::new(Duration::from_secs(120)));
        let engine = match build_engine(&config, offline, &case_dir, transport) {
            Ok(e) => e,
            Err(e) => return fail(OaStatus::InvalidArgument, format!("engine: {e}")),
        };
        let transcript = run_case(&case, Arc::new(index), &engine);
        *out = Box::into_raw(Box::new(OaTranscript { transcript }));
        OaStatus::Ok
    })
}

/// Loads a saved transcript file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn oa_transcript_load(
    path: *const c_char,
    out: *mut *mut OaTranscript,
) -> OaStatus {
    guard(|| {
        let out = match out_arg(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let path = match utf8_arg(path, "path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match Transcript::load(Path::new(path)) {
            Ok(transcript) => {
                *out = Box::into_raw(Box::new(OaTranscript { transcript }));
                OaStatus::Ok
            }
            Err(e) => fail(OaStatus::Malformed, format!("cannot load transcript {path}: {e}")),
        }
    })
}

/// Saves a transcript as pretty-printed JSON, atomically.
///
/// # Safety
/// `transcript` must be a live handle; `path` must be a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn oa_transcript_save(
    transcript: *const OaTranscript,
    path: *const c_char,
) -> OaStatus {
    guard(|| {
        let t = match handle_arg(transcript, "transcript") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let path = match utf8_arg(path, "path") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match t.transcript.save(Path::new(path)) {
            Ok(()) => OaStatus::Ok,
            Err(e) => fail(OaStatus::Io, format!("cannot save transcript {path}: {e}")),
        }
    })
}

/// Terminal status of the recorded run.
///
/// # Safety
/// `transcript` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oa_transcript_status(
    transcript: *const OaTranscript,
    out: *mut OaRunStatus,
) -> OaStatus {
    guard(|| {
        let out = match out_arg(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match handle_arg(transcript, "transcript") {
            Ok(t) => {
                *out = match t.transcript.status {
                    RunStatus::Ok => OaRunStatus::Ok,
                    RunStatus::Refused => OaRunStatus::Refused,
                    RunStatus::Error => OaRunStatus::Error,
                };
                OaStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Serializes the transcript to pretty-printed JSON.
///
/// # Safety
/// `transcript` must be a live handle; `out_json` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oa_transcript_to_json(
    transcript: *const OaTranscript,
    out_json: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let out = match out_arg(out_json, "out_json") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match handle_arg(transcript, "transcript") {
            Ok(t) => give_string(t.transcript.to_json_pretty(), out),
            Err(s) => s,
        }
    })
}

/// Re-derives the run from the transcript's own recorded inputs and compares
/// the outcome. Returns `Ok` when the replay matches; `Runtime` with the
/// differing fields in the error message when it does not.
///
/// # Safety
/// `transcript` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn oa_transcript_replay(transcript: *const OaTranscript) -> OaStatus {
    guard(|| {
        let t = match handle_arg(transcript, "transcript") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match replay_transcript(&t.transcript) {
            Ok(outcome) if outcome.matches => OaStatus::Ok,
            Ok(outcome) => fail(
                OaStatus::Runtime,
                format!("replay differs in: {}", outcome.differences.join(", ")),
            ),
            Err(e) => fail(OaStatus::Runtime, format!("replay failed: {e}")),
        }
    })
}

/// Releases a transcript handle. A null pointer is ignored.
///
/// # Safety
/// `transcript` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn oa_transcript_free(transcript: *mut OaTranscript) {
    if !transcript.is_null() {
        drop(Box::from_raw(transcript));
    }
}

/// Computes the evaluation report over a directory of rater annotation files
/// and writes it as a JSON object string.
///
/// # Safety
/// `annotations_dir` must be a valid NUL-terminated string; `out_json` must
/// be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn oa_eval_compute(
    annotations_dir: *const c_char,
    out_json: *mut *mut c_char,
) -> OaStatus {
    guard(|| {
        let out = match out_arg(out_json, "out_json") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let dir = match utf8_arg(annotations_dir, "annotations_dir") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let annotations = match load_annotations(Path::new(dir)) {
            Ok(a) => a,
            Err(e) => return fail(OaStatus::Malformed, format!("annotations: {e}")),
        };
        if annotations.is_empty() {
            return fail(OaStatus::InvalidArgument, format!("no annotation files in {dir}"));
        }
        match compute_metrics(&annotations) {
            Ok(report) => {
                give_string(serde_json::to_string_pretty(&report).expect("report serializes"), out)
            }
            Err(e) => fail(OaStatus::Runtime, format!("metrics: {e}")),
        }
    })
}
