#ifndef QOC_H
#define QOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum QocStatus {
  QOC_STATUS_OK = 0,
  QOC_STATUS_NULL_POINTER = 1,
  QOC_STATUS_INVALID_ARGUMENT = 2,
  QOC_STATUS_CONFIG = 3,
  QOC_STATUS_DIMENSION_MISMATCH = 4,
  QOC_STATUS_NUMERICAL = 5,
  QOC_STATUS_IO = 6,
  QOC_STATUS_PANIC = 7,
} QocStatus;

typedef enum QocStrategyKind {
  QOC_STRATEGY_KIND_STORE_ALL = 0,
  QOC_STRATEGY_KIND_CHECKPOINT = 1,
  QOC_STRATEGY_KIND_REVERT = 2,
  QOC_STRATEGY_KIND_REVERT_CHECKPOINT = 3,
} QocStrategyKind;

/**
 * Opaque problem handle.
 */
typedef struct QocProblem QocProblem;

/**
 * Peak additional storage of one gradient evaluation.
 */
typedef struct QocMemoryStats {
  size_t peak_u;
  size_t peak_k;
  size_t peak_psi;
  size_t peak_bytes;
  /**
   * NaN for strategies that do not reconstruct states.
   */
  double reconstruction_error;
} QocMemoryStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *qoc_last_error(void);

/**
 * Parses a JSON run config and builds a problem.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum QocStatus qoc_problem_from_json(const char *json, struct QocProblem **out);

/**
 * Releases a problem. NULL is ignored.
 *
 * # Safety
 * `problem` must come from `qoc_problem_from_json` and not be used afterwards.
 */
void qoc_problem_free(struct QocProblem *problem);

/**
 * Number of control channels, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t qoc_problem_n_controls(const struct QocProblem *problem);

/**
 * Number of knots `N + 1`, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t qoc_problem_n_knots(const struct QocProblem *problem);

/**
 * Copies the configured initial controls into `out` (`len` values).
 *
 * # Safety
 * `problem` must be a live handle and `out` must hold `len` doubles.
 */
enum QocStatus qoc_problem_initial_controls(const struct QocProblem *problem,
                                            double *out,
                                            size_t len);

/**
 * Selects the adjoint strategy. `period` is ignored for kinds without one.
 *
 * # Safety
 * `problem` must be a live handle.
 */
enum QocStatus qoc_problem_set_strategy(struct QocProblem *problem,
                                        enum QocStrategyKind kind,
                                        size_t period);

/**
 * Total cost at `controls`.
 *
 * # Safety
 * `problem` must be a live handle, `controls` must hold `len` doubles and
 * `out_total` must be writable.
 */
enum QocStatus qoc_cost(const struct QocProblem *problem,
                        const double *controls,
                        size_t len,
                        double *out_total);

/**
 * Gradient of the total cost with the selected strategy. `out_total` and
 * `out_stats` may be NULL.
 *
 * # Safety
 * `problem` must be a live handle, `controls` and `out_grad` must hold
 * `len` doubles, and non-NULL outputs must be writable.
 */
enum QocStatus qoc_gradient(const struct QocProblem *problem,
                            const double *controls,
                            size_t len,
                            double *out_grad,
                            double *out_total,
                            struct QocMemoryStats *out_stats);

/**
 * Runs gradient descent from `init` (or the configured initial controls
 * when `init` is NULL) and writes the best controls to `out_controls`.
 * `out_iterations`, `out_f0` and `out_converged` may be NULL.
 *
 * # Safety
 * `problem` must be a live handle, `init` (when non-NULL) and
 * `out_controls` must hold `len` doubles, and non-NULL outputs must be
 * writable.
 */
enum QocStatus qoc_optimize(const struct QocProblem *problem,
                            const double *init,
                            size_t len,
                            double *out_controls,
                            size_t *out_iterations,
                            double *out_f0,
                            bool *out_converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QOC_H */
