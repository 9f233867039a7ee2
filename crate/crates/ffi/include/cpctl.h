#ifndef CPCTL_H
#define CPCTL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CpctlStatus {
  CPCTL_STATUS_OK = 0,
  CPCTL_STATUS_NULL_ARGUMENT = 1,
  CPCTL_STATUS_INVALID_UTF8 = 2,
  CPCTL_STATUS_MODEL_ERROR = 3,
  CPCTL_STATUS_FORMULA_ERROR = 4,
  CPCTL_STATUS_ENGINE_ERROR = 5,
  CPCTL_STATUS_POLICY_ERROR = 6,
  CPCTL_STATUS_VERIFY_ERROR = 7,
  CPCTL_STATUS_NO_TARGET = 8,
  CPCTL_STATUS_OUT_OF_RANGE = 9,
  CPCTL_STATUS_PANIC = 10,
} CpctlStatus;

typedef enum CpctlFragment {
  CPCTL_FRAGMENT_CPCTL = 0,
  CPCTL_FRAGMENT_SAFE_PCTL = 1,
} CpctlFragment;

typedef enum CpctlViStatus {
  CPCTL_VI_STATUS_TARGET_MET = 0,
  CPCTL_VI_STATUS_CONVERGED_TARGET_UNMET = 2,
  CPCTL_VI_STATUS_ITER_CAP = 3,
} CpctlViStatus;

typedef struct CpctlFormula CpctlFormula;

typedef struct CpctlModel CpctlModel;

typedef struct CpctlPolicy CpctlPolicy;

typedef struct CpctlResult CpctlResult;

/**
 * Engine settings; obtain defaults from [`cpctl_config_default`].
 */
typedef struct CpctlConfig {
  double epsilon;
  size_t max_iters;
  double convergence_delta;
  uint32_t w_mix;
  size_t max_points;
  double slater_margin;
} CpctlConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into this library from the same thread.
 */
const char *cpctl_last_error_message(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void cpctl_string_free(char *s);

struct CpctlConfig cpctl_config_default(void);

/**
 * Parses a JSON model document.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum CpctlStatus cpctl_model_from_json(const char *json, struct CpctlModel **out);

/**
 * Builds a named model: `example1`, `thm1` (uses `alpha`, `eps`),
 * `gridworld1`, `gridworld2`.
 *
 * # Safety
 * `name` must be a nul-terminated string; `out` must be writable.
 */
enum CpctlStatus cpctl_model_builtin(const char *name,
                                     double alpha,
                                     double eps,
                                     struct CpctlModel **out);

/**
 * # Safety
 * `model` must be a live handle or null.
 */
size_t cpctl_model_num_states(const struct CpctlModel *model);

/**
 * Serializes the model; free the result with [`cpctl_string_free`].
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum CpctlStatus cpctl_model_to_json(const struct CpctlModel *model, char **out);

/**
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void cpctl_model_free(struct CpctlModel *model);

/**
 * # Safety
 * `text_in` must be a nul-terminated string; `out` must be writable.
 */
enum CpctlStatus cpctl_formula_parse(const char *text_in,
                                     enum CpctlFragment fragment,
                                     struct CpctlFormula **out);

/**
 * Number of probabilistic subformulas, i.e. the length of a counter vector.
 *
 * # Safety
 * `formula` must be a live handle or null.
 */
size_t cpctl_formula_num_paths(const struct CpctlFormula *formula);

/**
 * # Safety
 * `formula` must come from this library and not have been freed.
 */
void cpctl_formula_free(struct CpctlFormula *formula);

/**
 * Runs value iteration. `config` may be null for defaults.
 *
 * # Safety
 * Handles must be live; `config` null or valid; `out` writable.
 */
enum CpctlStatus cpctl_synthesize(const struct CpctlModel *model,
                                  const struct CpctlFormula *formula,
                                  const struct CpctlConfig *config,
                                  struct CpctlResult **out);

/**
 * # Safety
 * `result` must be a live handle.
 */
enum CpctlViStatus cpctl_result_status(const struct CpctlResult *result);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
size_t cpctl_result_iterations(const struct CpctlResult *result);

/**
 * Number of frontier points stored for `state`; 0 when out of range.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
size_t cpctl_result_num_points(const struct CpctlResult *result, size_t state);

/**
 * Copies the counters of point `k` at `state` into `buf`.
 *
 * # Safety
 * `result` must be a live handle; `buf` must hold `len` doubles.
 */
enum CpctlStatus cpctl_result_point_nu(const struct CpctlResult *result,
                                       size_t state,
                                       size_t k,
                                       double *buf,
                                       size_t len);

/**
 * Copies the counters of the point that meets the target.
 *
 * # Safety
 * `result` must be a live handle; `buf` must hold `len` doubles.
 */
enum CpctlStatus cpctl_result_target_nu(const struct CpctlResult *result, double *buf, size_t len);

/**
 * # Safety
 * `result` must come from this library and not have been freed.
 */
void cpctl_result_free(struct CpctlResult *result);

/**
 * Extracts a finite-memory policy for the target point.
 *
 * # Safety
 * `result` must be a live handle; `out` must be writable.
 */
enum CpctlStatus cpctl_policy_extract(const struct CpctlResult *result, struct CpctlPolicy **out);

/**
 * # Safety
 * `policy` must be a live handle or null.
 */
size_t cpctl_policy_num_memory(const struct CpctlPolicy *policy);

/**
 * Serializes the policy; free the result with [`cpctl_string_free`].
 *
 * # Safety
 * `policy` must be a live handle; `out` must be writable.
 */
enum CpctlStatus cpctl_policy_to_json(const struct CpctlPolicy *policy, char **out);

/**
 * Exact path probabilities from the initial state on the product chain.
 *
 * # Safety
 * `policy` must be a live handle; `buf` must hold `len` doubles.
 */
enum CpctlStatus cpctl_policy_check(const struct CpctlPolicy *policy, double *buf, size_t len);

/**
 * Returns `Ok` when every compatibility clause holds and `PolicyError`
 * naming the first violation otherwise.
 *
 * # Safety
 * `policy` must be a live handle.
 */
enum CpctlStatus cpctl_policy_certify(const struct CpctlPolicy *policy);

/**
 * # Safety
 * `policy` must come from this library and not have been freed.
 */
void cpctl_policy_free(struct CpctlPolicy *policy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPCTL_H */
