#ifndef COVCAST_H
#define COVCAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of quantile levels per forecast step.
 */
#define COVCAST_NUM_QUANTILES 9

/**
 * Result codes.
 */
typedef enum CovcastStatus {
  COVCAST_STATUS_OK = 0,
  COVCAST_STATUS_NULL_POINTER = 1,
  COVCAST_STATUS_INVALID_ARGUMENT = 2,
  COVCAST_STATUS_IO = 3,
  COVCAST_STATUS_CHECKPOINT = 4,
  COVCAST_STATUS_UNSUPPORTED = 5,
  COVCAST_STATUS_NUMERIC = 6,
  COVCAST_STATUS_INTERNAL = 7,
} CovcastStatus;

/**
 * Opaque trained forecaster.
 */
typedef struct CovcastModel CovcastModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *covcast_last_error(void);

/**
 * Loads a checkpoint file. `*out` receives a handle owned by the caller.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum CovcastStatus covcast_model_load(const char *path, struct CovcastModel **out);

/**
 * Loads a checkpoint from memory.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` be writable.
 */
enum CovcastStatus covcast_model_load_bytes(const uint8_t *data,
                                            size_t len,
                                            struct CovcastModel **out);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from `covcast_model_load*` and not be used afterwards.
 */
void covcast_model_free(struct CovcastModel *model);

/**
 * Number of scalar parameters, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t covcast_model_num_parameters(const struct CovcastModel *model);

/**
 * Quantile forecast for one series.
 *
 * `context` holds `context_len` values; `observed` may be null (all
 * observed) or hold `context_len` flags, non-zero meaning observed.
 * `covariates` is row-major `num_covariates x (context_len + horizon)`, each
 * row known over context and horizon. `out` receives `horizon x 9` values
 * sorted within each step.
 *
 * # Safety
 * All non-null pointers must reference arrays of the stated sizes.
 */
enum CovcastStatus covcast_model_predict(const struct CovcastModel *model,
                                         const double *context,
                                         const uint8_t *observed,
                                         size_t context_len,
                                         const double *covariates,
                                         size_t num_covariates,
                                         size_t horizon,
                                         size_t period,
                                         bool use_covariates,
                                         double *out);

/**
 * Seasonal naive forecast written as `horizon x 9` values.
 *
 * # Safety
 * `context` must hold `context_len` values and `out` `horizon * 9`.
 */
enum CovcastStatus covcast_seasonal_naive(const double *context,
                                          size_t context_len,
                                          size_t period,
                                          size_t horizon,
                                          double *out);

/**
 * Mean absolute scaled error of a point forecast against `truth`, scaled by
 * the in-sample seasonal naive error of `context`.
 *
 * # Safety
 * `median` and `truth` must hold `len` values, `context` `context_len`.
 */
enum CovcastStatus covcast_mase(const double *median,
                                const double *truth,
                                size_t len,
                                const double *context,
                                size_t context_len,
                                size_t period,
                                double *out);

/**
 * Weighted quantile loss of a `len x 9` forecast. Steps whose truth is
 * zero are excluded.
 *
 * # Safety
 * `forecast` must hold `len * 9` values and `truth` `len`.
 */
enum CovcastStatus covcast_wql(const double *forecast,
                               const double *truth,
                               size_t len,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVCAST_H */
