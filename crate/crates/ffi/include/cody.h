#ifndef CODY_H
#define CODY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CodyExplainer {
  CODY_EXPLAINER_GREEDY = 0,
  CODY_EXPLAINER_CODY = 1,
} CodyExplainer;

typedef enum CodyPolicy {
  CODY_POLICY_RANDOM = 0,
  CODY_POLICY_TEMPORAL = 1,
  CODY_POLICY_SPATIO_TEMPORAL = 2,
  CODY_POLICY_EVENT_IMPACT = 3,
} CodyPolicy;

typedef enum CodyStatus {
  CODY_STATUS_OK = 0,
  CODY_STATUS_NULL_POINTER = 1,
  CODY_STATUS_INVALID_ARGUMENT = 2,
  CODY_STATUS_NOT_FOUND = 3,
  CODY_STATUS_IO = 4,
  CODY_STATUS_PARSE = 5,
  CODY_STATUS_ORACLE = 6,
  CODY_STATUS_DEGENERATE = 7,
  CODY_STATUS_PANIC = 8,
} CodyStatus;

/**
 * Loaded interaction log.
 */
typedef struct CodyGraph CodyGraph;

typedef struct CodyResult CodyResult;

/**
 * Predictor with its prediction cache and call counter.
 */
typedef struct CodySession CodySession;

/**
 * Search settings. Start from [`cody_explain_options_default`].
 */
typedef struct CodyExplainOptions {
  enum CodyExplainer explainer;
  enum CodyPolicy policy;
  /**
   * Seed of the random policy.
   */
  uint64_t seed;
  /**
   * Hop radius; 0 takes the oracle's layer count.
   */
  uint32_t k;
  size_t m_max;
  uint64_t it_max;
  double alpha;
  size_t l;
  bool best_first_stop;
  bool prune_duplicates;
} CodyExplainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *cody_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cody_version(void);

/**
 * Load a CSV interaction log (`user_id,item_id,timestamp,state_label,...`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CodyStatus cody_graph_load_csv(const char *path, bool bipartite, struct CodyGraph **out);

/**
 * # Safety
 * `graph` must come from [`cody_graph_load_csv`] or be NULL.
 */
void cody_graph_free(struct CodyGraph *graph);

/**
 * # Safety
 * `graph` must be a live graph handle or NULL (returns 0).
 */
size_t cody_graph_num_events(const struct CodyGraph *graph);

/**
 * # Safety
 * `graph` must be a live graph handle or NULL (returns 0).
 */
size_t cody_graph_num_nodes(const struct CodyGraph *graph);

/**
 * Open a predictor session. `oracle` is `reference`, `bridge:<host:port>`
 * or `fixture:<path>`; the reference predictor is fitted to `graph`.
 *
 * # Safety
 * `graph` must be live, `oracle` NUL-terminated and `out` valid.
 */
enum CodyStatus cody_session_new(const struct CodyGraph *graph,
                                 const char *oracle,
                                 struct CodySession **out);

/**
 * # Safety
 * `session` must come from [`cody_session_new`] or be NULL.
 */
void cody_session_free(struct CodySession *session);

/**
 * Distinct predictions computed so far.
 *
 * # Safety
 * `session` must be live or NULL (returns 0).
 */
uint64_t cody_session_oracle_calls(const struct CodySession *session);

/**
 * # Safety
 * `session` must be live or NULL.
 */
void cody_session_clear_cache(struct CodySession *session);

struct CodyExplainOptions cody_explain_options_default(void);

/**
 * Explain the prediction for event `target_event_id`. `options` may be NULL
 * for the defaults.
 *
 * # Safety
 * Handles must be live; `out` must be valid.
 */
enum CodyStatus cody_explain(const struct CodyGraph *graph,
                             struct CodySession *session,
                             uint64_t target_event_id,
                             const struct CodyExplainOptions *options,
                             struct CodyResult **out);

/**
 * Like [`cody_explain`] for the link from the event's source to `dst` at
 * the event's time.
 *
 * # Safety
 * Handles must be live; `out` must be valid.
 */
enum CodyStatus cody_explain_link(const struct CodyGraph *graph,
                                  struct CodySession *session,
                                  uint64_t target_event_id,
                                  uint32_t dst,
                                  const struct CodyExplainOptions *options,
                                  struct CodyResult **out);

/**
 * # Safety
 * `result` must come from an explain call or be NULL.
 */
void cody_result_free(struct CodyResult *result);

/**
 * Number of events in the explanation.
 *
 * # Safety
 * `result` must be live or NULL (returns 0).
 */
size_t cody_result_len(const struct CodyResult *result);

/**
 * Copy up to `capacity` event ids into `buffer` in the order they were
 * added; returns the full count.
 *
 * # Safety
 * `buffer` must hold `capacity` elements (may be NULL when `capacity` is 0).
 */
size_t cody_result_events(const struct CodyResult *result, uint64_t *buffer, size_t capacity);

/**
 * # Safety
 * `result` must be live or NULL (returns false).
 */
bool cody_result_is_counterfactual(const struct CodyResult *result);

/**
 * # Safety
 * `result` must be live or NULL (returns NaN).
 */
double cody_result_original_logit(const struct CodyResult *result);

/**
 * # Safety
 * `result` must be live or NULL (returns NaN).
 */
double cody_result_achieved_logit(const struct CodyResult *result);

/**
 * # Safety
 * `result` must be live or NULL (returns 0).
 */
uint64_t cody_result_oracle_calls(const struct CodyResult *result);

/**
 * # Safety
 * `result` must be live or NULL (returns 0).
 */
uint64_t cody_result_iterations(const struct CodyResult *result);

/**
 * # Safety
 * `result` must be live or NULL (returns 0).
 */
size_t cody_result_candidate_size(const struct CodyResult *result);

/**
 * Full result as JSON. Release with [`cody_string_free`]; NULL on failure.
 *
 * # Safety
 * `result` must be live or NULL.
 */
char *cody_result_to_json(const struct CodyResult *result);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void cody_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CODY_H */
