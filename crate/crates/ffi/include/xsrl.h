#ifndef XSRL_H
#define XSRL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum XsrlStatus {
  XSRL_STATUS_OK = 0,
  XSRL_STATUS_NULL_ARGUMENT = 1,
  XSRL_STATUS_INVALID_UTF8 = 2,
  XSRL_STATUS_INVALID_INPUT = 3,
  XSRL_STATUS_IO = 4,
  XSRL_STATUS_FORMAT = 5,
  XSRL_STATUS_NUMERIC = 6,
  XSRL_STATUS_PANIC = 7,
} XsrlStatus;

/**
 * A loaded model. Opaque to C.
 */
typedef struct XsrlModel XsrlModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *xsrl_last_error(void);

/**
 * Library version as a static string.
 */
const char *xsrl_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void xsrl_string_free(char *s);

/**
 * Loads a checkpoint written by training.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum XsrlStatus xsrl_model_load(const char *path, struct XsrlModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`xsrl_model_load`], not yet freed.
 */
void xsrl_model_free(struct XsrlModel *model);

/**
 * Decodes one sentence with a marked predicate. `tokens` is
 * space-separated, `predicate` a 0-based token index, `source_lang` a
 * plain code such as `EN`, and `target` an indicator such as `DE-SRL`.
 * Writes the output symbols, space-separated, to `out`.
 *
 * # Safety
 * String arguments must be NUL-terminated; `model` must be a live handle
 * and `out` a valid pointer.
 */
enum XsrlStatus xsrl_model_label(const struct XsrlModel *model,
                                 const char *tokens,
                                 size_t predicate,
                                 const char *source_lang,
                                 const char *target,
                                 size_t beam_width,
                                 size_t max_len,
                                 char **out);

/**
 * Serializes a sentence: `args` is a JSON array of `[start, end, label]`
 * triples over token positions (inclusive).
 *
 * # Safety
 * String arguments must be NUL-terminated and `out` a valid pointer.
 */
enum XsrlStatus xsrl_linearize(const char *tokens, size_t predicate, const char *args, char **out);

/**
 * Recovers arguments from a symbol stream, repairing ill-formed input.
 * Writes `{"tokens": [...], "arguments": [[start, end, label], ...],
 * "repairs": {...}}` to `out`.
 *
 * # Safety
 * `symbols` must be NUL-terminated and `out` a valid pointer.
 */
enum XsrlStatus xsrl_delinearize(const char *symbols, size_t predicate, char **out);

/**
 * Smoothed sentence BLEU in `[0, 100]` of space-separated strings.
 *
 * # Safety
 * String arguments must be NUL-terminated and `out` a valid pointer.
 */
enum XsrlStatus xsrl_bleu_sentence(const char *hypothesis, const char *reference, double *out);

/**
 * Corpus BLEU over `n` pairs; writes the full, words-only and labels-only
 * scores to `out[0..3]`.
 *
 * # Safety
 * `hypotheses` and `references` must point to `n` NUL-terminated strings
 * each, and `out` to room for three doubles.
 */
enum XsrlStatus xsrl_bleu_corpus(const char *const *hypotheses,
                                 const char *const *references,
                                 size_t n,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XSRL_H */
