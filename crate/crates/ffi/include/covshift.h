#ifndef COVSHIFT_H
#define COVSHIFT_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CovshiftStatus {
  COVSHIFT_STATUS_OK = 0,
  COVSHIFT_STATUS_INVALID_INPUT = 1,
  COVSHIFT_STATUS_PARSE = 2,
  COVSHIFT_STATUS_KAPPA_MISMATCH = 3,
  COVSHIFT_STATUS_VERSION = 4,
  COVSHIFT_STATUS_MODEL = 5,
  COVSHIFT_STATUS_IO = 6,
  COVSHIFT_STATUS_JSON = 7,
  COVSHIFT_STATUS_NULL_POINTER = 8,
  COVSHIFT_STATUS_PANIC = 9,
} CovshiftStatus;

/**
 * Opaque fitted detector.
 */
typedef struct CovshiftModel CovshiftModel;

/**
 * One fitted target coverage.
 */
typedef struct CovshiftCoveragePair {
  double c_target;
  double b_star;
  double theta;
} CovshiftCoveragePair;

/**
 * Outcome of `covshift_detect`.
 */
typedef struct CovshiftReport {
  double v_statistic;
  double t_statistic;
  double p_value;
  bool shift_detected;
  size_t window_size;
  size_t violated_count;
} CovshiftReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *covshift_last_error_message(void);

/**
 * Fit a detector on `len` training scores.
 *
 * `kappa` names the confidence function that produced the scores
 * (`"sr"`, `"entropy"` or `"raw"`); NULL means `"entropy"`.
 *
 * # Safety
 * `scores` must point to `len` doubles; `kappa` must be NULL or a
 * NUL-terminated string; `out` must be writable.
 */
enum CovshiftStatus covshift_fit(const double *scores,
                                 size_t len,
                                 const char *kappa,
                                 double delta,
                                 size_t coverage_count,
                                 struct CovshiftModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CovshiftStatus covshift_model_load(const char *path, struct CovshiftModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum CovshiftStatus covshift_model_save(const struct CovshiftModel *model, const char *path);

/**
 * Number of fitted target coverages, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t covshift_model_coverage_count(const struct CovshiftModel *model);

/**
 * Training-sample size the model was fitted on, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t covshift_model_training_size(const struct CovshiftModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum CovshiftStatus covshift_model_pair(const struct CovshiftModel *model,
                                        size_t index,
                                        struct CovshiftCoveragePair *out);

/**
 * Test a window of `len` scores, computed with the model's confidence
 * function. Safe to call concurrently on the same handle.
 *
 * # Safety
 * `model` must be a live handle; `window` must point to `len` doubles;
 * `report` must be writable.
 */
enum CovshiftStatus covshift_detect(const struct CovshiftModel *model,
                                    const double *window,
                                    size_t len,
                                    double alpha,
                                    struct CovshiftReport *report);

/**
 * Release a handle. NULL is ignored.
 *
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void covshift_model_free(struct CovshiftModel *model);

/**
 * Binomial-tail lower bound on coverage for `successes` out of `m`.
 *
 * # Safety
 * `b_star` must be writable; `satisfiable` must be NULL or writable.
 */
enum CovshiftStatus covshift_solve_bound(uint64_t m,
                                         uint64_t successes,
                                         double delta,
                                         double *b_star,
                                         bool *satisfiable);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVSHIFT_H */
