#ifndef REEX_H
#define REEX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define REEX_RELATION_IS_A 1

#define REEX_RELATION_PART_OF (1 << 1)

#define REEX_RELATION_REGULATES (1 << 2)

#define REEX_RELATION_NEGATIVELY_REGULATES (1 << 3)

#define REEX_RELATION_POSITIVELY_REGULATES (1 << 4)

/**
 * Traverse every relation kind.
 */
#define REEX_RELATION_ALL 31

typedef enum ReexAlgorithm {
  REEX_ALGORITHM_STAIRCASE = 0,
  REEX_ALGORITHM_ANCESTRY = 1,
} ReexAlgorithm;

typedef enum ReexFormat {
  REEX_FORMAT_TEXT = 0,
  REEX_FORMAT_JSON = 1,
  REEX_FORMAT_CSV = 2,
} ReexFormat;

typedef enum ReexStatus {
  REEX_STATUS_OK = 0,
  REEX_STATUS_NULL_ARGUMENT = 1,
  REEX_STATUS_INVALID_UTF8 = 2,
  REEX_STATUS_PARSE_ERROR = 3,
  REEX_STATUS_VALIDATION_ERROR = 4,
  REEX_STATUS_LOOKUP_ERROR = 5,
  REEX_STATUS_INVALID_ARGUMENT = 6,
  REEX_STATUS_REASONING_ERROR = 7,
  REEX_STATUS_PANIC = 8,
} ReexStatus;

/**
 * Parsed feature annotation map, already filtered against an ontology.
 */
typedef struct ReexMapping ReexMapping;

/**
 * Parsed ontology.
 */
typedef struct ReexOntology ReexOntology;

/**
 * Parameters for [`reex_run`]. Start from [`reex_run_options_default`].
 */
typedef struct ReexRunOptions {
  enum ReexAlgorithm algorithm;
  double threshold;
  double weight;
  size_t min_terms;
  double step;
  uint64_t seed;
  bool use_absolute;
  bool include_misclassified;
  bool ic_from_dataset;
  /**
   * Pass limit per class; 0 uses the number of ontology terms.
   */
  size_t max_iterations;
  enum ReexFormat format;
} ReexRunOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *reex_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *reex_last_error_message(void);

struct ReexRunOptions reex_run_options_default(void);

/**
 * Parses OBO text. `relations` is a mask of `REEX_RELATION_*` bits; 0 means all.
 *
 * # Safety
 * `data` must point to `len` readable bytes (or may be NULL when `len` is 0)
 * and `out` must be a valid pointer to writable storage.
 */
enum ReexStatus reex_ontology_parse(const uint8_t *data,
                                    size_t len,
                                    uint32_t relations_mask,
                                    struct ReexOntology **out);

/**
 * # Safety
 * `ontology` must be NULL or a handle from [`reex_ontology_parse`] not yet freed.
 */
void reex_ontology_free(struct ReexOntology *ontology);

/**
 * Number of terms, or 0 for a NULL handle.
 *
 * # Safety
 * `ontology` must be NULL or a live handle.
 */
size_t reex_ontology_term_count(const struct ReexOntology *ontology);

/**
 * Size of the reflexive descendant set of `term`.
 *
 * # Safety
 * `ontology` must be a live handle, `term` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum ReexStatus reex_ontology_descendant_count(const struct ReexOntology *ontology,
                                               const char *term,
                                               size_t *out);

/**
 * Lowest common ancestor of two distinct terms. When the terms share no
 * ancestor the call succeeds with `*out_term` set to NULL.
 *
 * # Safety
 * `ontology` must be a live handle, `a` and `b` NUL-terminated strings, and
 * `out_term`/`out_depth` valid pointers.
 */
enum ReexStatus reex_ontology_lca(const struct ReexOntology *ontology,
                                  const char *a,
                                  const char *b,
                                  char **out_term,
                                  uint32_t *out_depth);

/**
 * Parses a `feature<TAB>term[,term...]` mapping, dropping terms absent from
 * `ontology`.
 *
 * # Safety
 * `data` must point to `len` readable bytes, `ontology` must be a live
 * handle and `out` a valid pointer.
 */
enum ReexStatus reex_mapping_parse(const uint8_t *data,
                                   size_t len,
                                   const struct ReexOntology *ontology,
                                   struct ReexMapping **out);

/**
 * # Safety
 * `mapping` must be NULL or a handle from [`reex_mapping_parse`] not yet freed.
 */
void reex_mapping_free(struct ReexMapping *mapping);

/**
 * Number of distinct features, or 0 for a NULL handle.
 *
 * # Safety
 * `mapping` must be NULL or a live handle.
 */
size_t reex_mapping_feature_count(const struct ReexMapping *mapping);

/**
 * GenQ of a set of `count` term ids, with priors from `mapping`.
 *
 * # Safety
 * Handles must be live, `terms` must point to `count` NUL-terminated
 * strings and `out` must be a valid pointer.
 */
enum ReexStatus reex_genq(const struct ReexOntology *ontology,
                          const struct ReexMapping *mapping,
                          const char *const *terms,
                          size_t count,
                          double *out);

/**
 * Runs the full pipeline over an interchange JSON document and returns the
 * rendered report in `*out_report`.
 *
 * # Safety
 * Handles must be live, `explanations` must point to `len` readable bytes,
 * `options` must be NULL (defaults) or point to a valid
 * [`ReexRunOptions`], and `out_report` must be a valid pointer.
 */
enum ReexStatus reex_run(const struct ReexOntology *ontology,
                         const struct ReexMapping *mapping,
                         const uint8_t *explanations,
                         size_t len,
                         const struct ReexRunOptions *options,
                         char **out_report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void reex_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REEX_H */
