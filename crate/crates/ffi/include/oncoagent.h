/* C interface for the oncoagent engine. Generated; do not edit. */

#ifndef ONCOAGENT_H
#define ONCOAGENT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call. Anything other than `Ok` leaves a
// human-readable explanation readable via `oa_last_error`.
typedef enum OaStatus {
  OA_STATUS_OK = 0,
  OA_STATUS_NULL_POINTER = 1,
  OA_STATUS_INVALID_UTF8 = 2,
  OA_STATUS_INVALID_ARGUMENT = 3,
  OA_STATUS_IO = 4,
  OA_STATUS_MALFORMED = 5,
  OA_STATUS_RUNTIME = 6,
  OA_STATUS_PANIC = 7,
} OaStatus;

// Terminal state of a stored run.
typedef enum OaRunStatus {
  OA_RUN_STATUS_OK = 0,
  OA_RUN_STATUS_REFUSED = 1,
  OA_RUN_STATUS_ERROR = 2,
} OaRunStatus;

// A loaded jsonlines corpus. Create with `oa_corpus_load`, release with
// `oa_corpus_free`.
typedef struct OaCorpus OaCorpus;

// An embedded chunk index. Create with `oa_index_build` or `oa_index_load`,
// release with `oa_index_free`.
typedef struct OaIndex OaIndex;

// A recorded case run. Create with `oa_run_case` or `oa_transcript_load`,
// release with `oa_transcript_free`.
typedef struct OaTranscript OaTranscript;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string. Do not free.
const char *oa_version(void);

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread. Do not free.
const char *oa_last_error(void);

// Releases a string returned by this library. A null pointer is ignored.
//
// # Safety
// `s` must have been returned by a function of this library and not freed
// before.
void oa_string_free(char *s);

// Loads a jsonlines corpus file into a handle.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be valid for
// writes.
enum OaStatus oa_corpus_load(const char *path, struct OaCorpus **out);

// Number of documents in the corpus.
//
// # Safety
// `corpus` must be a live handle; `out` must be valid for writes.
enum OaStatus oa_corpus_len(const struct OaCorpus *corpus, size_t *out);

// Releases a corpus handle. A null pointer is ignored.
//
// # Safety
// `corpus` must have come from `oa_corpus_load` and not been freed before.
void oa_corpus_free(struct OaCorpus *corpus);

// Chunks and embeds a corpus into an index with the deterministic local
// embedder at the given dimension, using the standard window sizes.
//
// # Safety
// `corpus` must be a live handle; `out` must be valid for writes.
enum OaStatus oa_index_build(const struct OaCorpus *corpus, size_t dimension, struct OaIndex **out);

// Loads a persisted index file.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be valid for
// writes.
enum OaStatus oa_index_load(const char *path, struct OaIndex **out);

// Persists an index to a file, atomically.
//
// # Safety
// `index` must be a live handle; `path` must be a valid NUL-terminated
// string.
enum OaStatus oa_index_save(const struct OaIndex *index, const char *path);

// Number of embedded chunks in the index.
//
// # Safety
// `index` must be a live handle; `out` must be valid for writes.
enum OaStatus oa_index_len(const struct OaIndex *index, size_t *out);

// Ranks the index against a query embedded with the deterministic local
// embedder and writes a JSON array of {chunk_id, score, text} objects.
//
// # Safety
// `index` must be a live handle; `query` must be a valid NUL-terminated
// string; `out_json` must be valid for writes.
enum OaStatus oa_index_search(const struct OaIndex *index,
                              const char *query,
                              size_t top_n,
                              char **out_json);

// Releases an index handle. A null pointer is ignored.
//
// # Safety
// `index` must have come from this library and not been freed before.
void oa_index_free(struct OaIndex *index);

// Runs one case through the full pipeline and returns the transcript
// handle. Paths in the case file resolve against the case file's directory.
// With `offline` set, every remote component is replaced by its
// deterministic mock and the network is never touched. The run itself never
// fails this call: refusals and stage errors are recorded in the
// transcript's status.
//
// # Safety
// The three paths must be valid NUL-terminated strings; `out` must be valid
// for writes.
enum OaStatus oa_run_case(const char *config_path,
                          const char *case_path,
                          const char *index_path,
                          bool offline,
                          struct OaTranscript **out);

// Loads a saved transcript file.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be valid for
// writes.
enum OaStatus oa_transcript_load(const char *path, struct OaTranscript **out);

// Saves a transcript as pretty-printed JSON, atomically.
//
// # Safety
// `transcript` must be a live handle; `path` must be a valid NUL-terminated
// string.
enum OaStatus oa_transcript_save(const struct OaTranscript *transcript, const char *path);

// Terminal status of the recorded run.
//
// # Safety
// `transcript` must be a live handle; `out` must be valid for writes.
enum OaStatus oa_transcript_status(const struct OaTranscript *transcript, enum OaRunStatus *out);

// Serializes the transcript to pretty-printed JSON.
//
// # Safety
// `transcript` must be a live handle; `out_json` must be valid for writes.
enum OaStatus oa_transcript_to_json(const struct OaTranscript *transcript, char **out_json);

// Re-derives the run from the transcript's own recorded inputs and compares
// the outcome. Returns `Ok` when the replay matches; `Runtime` with the
// differing fields in the error message when it does not.
//
// # Safety
// `transcript` must be a live handle.
enum OaStatus oa_transcript_replay(const struct OaTranscript *transcript);

// Releases a transcript handle. A null pointer is ignored.
//
// # Safety
// `transcript` must have come from this library and not been freed before.
void oa_transcript_free(struct OaTranscript *transcript);

// Computes the evaluation report over a directory of rater annotation files
// and writes it as a JSON object string.
//
// # Safety
// `annotations_dir` must be a valid NUL-terminated string; `out_json` must
// be valid for writes.
enum OaStatus oa_eval_compute(const char *annotations_dir, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ONCOAGENT_H */
