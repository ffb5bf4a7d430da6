#ifndef CUTSPACE_H
#define CUTSPACE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CUTSPACE_MODE_PRIOR_WEIGHTED 0

#define CUTSPACE_MODE_PLAIN_MARGINAL 1

#define CUTSPACE_FORMAT_TEXT 0

#define CUTSPACE_FORMAT_LATEX 1

typedef enum CutspaceStatus {
  CUTSPACE_STATUS_OK = 0,
  CUTSPACE_STATUS_NULL_POINTER = 1,
  CUTSPACE_STATUS_INVALID_UTF8 = 2,
  CUTSPACE_STATUS_PARSE = 3,
  CUTSPACE_STATUS_VALIDATION = 4,
  CUTSPACE_STATUS_DOMAIN = 5,
  CUTSPACE_STATUS_CAP_EXCEEDED = 6,
  CUTSPACE_STATUS_INVALID_ARGUMENT = 7,
  CUTSPACE_STATUS_PANIC = 8,
} CutspaceStatus;

/**
 * Opaque enumeration of every posterior of one partition.
 */
typedef struct CutspaceEnumeration CutspaceEnumeration;

/**
 * Opaque parsed network.
 */
typedef struct CutspaceNet CutspaceNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * owned by the library and valid until the next call on this thread.
 */
const char *cutspace_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` is null or a string returned by this library and not yet freed.
 */
void cutspace_string_free(char *s);

/**
 * Parses and validates a network document.
 *
 * # Safety
 * `json` is a nul-terminated string; `out` is valid for writes.
 */
enum CutspaceStatus cutspace_net_parse(const char *json, struct CutspaceNet **out);

/**
 * # Safety
 * `net` is null or a handle from `cutspace_net_parse` not yet freed.
 */
void cutspace_net_free(struct CutspaceNet *net);

/**
 * # Safety
 * `net` is a live handle; `out` is valid for writes.
 */
enum CutspaceStatus cutspace_net_node_count(const struct CutspaceNet *net, size_t *out);

/**
 * Number of valid decisions on `n` module vertices.
 *
 * # Safety
 * `out` is valid for writes.
 */
enum CutspaceStatus cutspace_count_decisions(size_t n, uint64_t *out);

/**
 * Builds every posterior over orientations and decision sets of a partition.
 * A null `partition_json` means a single block.
 *
 * # Safety
 * `net` is a live handle; `partition_json` is null or nul-terminated; `out`
 * is valid for writes.
 */
enum CutspaceStatus cutspace_enumerate(const struct CutspaceNet *net,
                                       const char *partition_json,
                                       uint32_t mode_flag,
                                       struct CutspaceEnumeration **out);

/**
 * # Safety
 * `en` is null or a handle from `cutspace_enumerate` not yet freed.
 */
void cutspace_enumeration_free(struct CutspaceEnumeration *en);

/**
 * Number of posteriors built, duplicates included.
 *
 * # Safety
 * `en` is a live handle; `out` is valid for writes.
 */
enum CutspaceStatus cutspace_enumeration_len(const struct CutspaceEnumeration *en, size_t *out);

/**
 * Number of distinct posteriors.
 *
 * # Safety
 * `en` is a live handle; `out` is valid for writes.
 */
enum CutspaceStatus cutspace_enumeration_distinct_len(const struct CutspaceEnumeration *en,
                                                      size_t *out);

/**
 * Renders the posterior at `index`. The string is freed with
 * `cutspace_string_free`.
 *
 * # Safety
 * `en` is a live handle; `out` is valid for writes.
 */
enum CutspaceStatus cutspace_enumeration_render(const struct CutspaceEnumeration *en,
                                                size_t index,
                                                uint32_t format_flag,
                                                char **out);

/**
 * Evaluates one posterior and writes its table as JSON. Null documents take
 * their defaults: a single block, lower-to-higher orientation, the first
 * decision set, no evidence.
 *
 * # Safety
 * `net` is a live handle; every document is null or nul-terminated; `out` is
 * valid for writes.
 */
enum CutspaceStatus cutspace_eval_json(const struct CutspaceNet *net,
                                       const char *partition_json,
                                       const char *orientation_json,
                                       const char *decision_json,
                                       const char *evidence_json,
                                       uint32_t mode_flag,
                                       char **out);

/**
 * Held-out log predictive density of one posterior, as JSON. Document
 * defaults follow `cutspace_eval_json`; `heldout_json` is required.
 *
 * # Safety
 * As for `cutspace_eval_json`.
 */
enum CutspaceStatus cutspace_score_json(const struct CutspaceNet *net,
                                        const char *partition_json,
                                        const char *orientation_json,
                                        const char *decision_json,
                                        const char *train_json,
                                        const char *heldout_json,
                                        uint32_t mode_flag,
                                        char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUTSPACE_H */
