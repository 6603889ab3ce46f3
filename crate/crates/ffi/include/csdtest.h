/* C interface for csdtest: conditional stochastic dominance tests at target covariate points. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of an FFI call.
typedef enum CsdStatus {
  CSD_STATUS_OK = 0,
  // A parameter violated its documented range or shape.
  CSD_STATUS_INVALID_ARGUMENT = 1,
  // The problem size exceeds what the requested method supports.
  CSD_STATUS_UNSUPPORTED_SIZE = 2,
  // The computation itself failed (degenerate data, undefined statistic).
  CSD_STATUS_COMPUTATION_ERROR = 3,
  // A required pointer was null.
  CSD_STATUS_NULL_POINTER = 4,
} CsdStatus;

// Opaque test configuration.
typedef struct CsdConfig CsdConfig;

// Opaque result of a run.
typedef struct CsdResult CsdResult;

// Per-target summary returned by [`csdtest_result_target`].
typedef struct CsdTargetSummary {
  double target;
  uintptr_t q_y;
  uintptr_t q_x;
  double statistic_value;
  double critical_value;
  double p_value;
  // 1 when the null is rejected at this target.
  int32_t reject;
  // The level this individual target was tested at.
  double level;
} CsdTargetSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent error on this thread. The pointer
// stays valid until the next failing call on the same thread.
const char *csdtest_last_error_message(void);

// Creates a configuration testing at level `alpha`. Returns null when
// `alpha` lies outside (0, 1). Add at least one target before running.
struct CsdConfig *csdtest_config_new(double alpha);

// Releases a configuration.
//
// # Safety
// `config` must be a pointer from [`csdtest_config_new`] not yet freed,
// or null (a no-op).
void csdtest_config_free(struct CsdConfig *config);

// Adds a target covariate point.
//
// # Safety
// `config` must be a live pointer from [`csdtest_config_new`].
enum CsdStatus csdtest_config_add_target(struct CsdConfig *config, double z0);

// Chooses the statistic: 0 = KS (default), 1 = CvM, 2 = AD.
//
// # Safety
// `config` must be a live pointer from [`csdtest_config_new`].
enum CsdStatus csdtest_config_set_statistic(struct CsdConfig *config, int32_t kind);

// Fixes the effective sample sizes instead of the data-dependent rule.
//
// # Safety
// `config` must be a live pointer from [`csdtest_config_new`].
enum CsdStatus csdtest_config_set_manual_q(struct CsdConfig *config, uintptr_t q_y, uintptr_t q_x);

// Switches critical values to Monte Carlo with the given draw count and
// seed (the default is the exact engine).
//
// # Safety
// `config` must be a live pointer from [`csdtest_config_new`].
enum CsdStatus csdtest_config_set_mc_critical_values(struct CsdConfig *config,
                                                     uint64_t draws,
                                                     uint64_t seed);

// Enables the refined critical value for outcomes with at most `r`
// support points (KS statistic only).
//
// # Safety
// `config` must be a live pointer from [`csdtest_config_new`].
enum CsdStatus csdtest_config_set_refined(struct CsdConfig *config, uintptr_t r);

// Configures a sharp regression discontinuity cutoff for
// [`csdtest_run_rdd`].
//
// # Safety
// `config` must be a live pointer from [`csdtest_config_new`].
enum CsdStatus csdtest_config_set_rdd_cutoff(struct CsdConfig *config, double cutoff);

// Runs the two-sample test. `y_w[i]` pairs with `y_z[i]` and likewise for
// the X side. On success `*out` owns a result handle.
//
// # Safety
// `config` must be a live configuration handle; `y_w`/`y_z` must point to
// `n_y` readable doubles and `x_w`/`x_z` to `n_x`; `out` must be a valid
// destination pointer.
enum CsdStatus csdtest_run(const struct CsdConfig *config,
                           const double *y_w,
                           const double *y_z,
                           uintptr_t n_y,
                           const double *x_w,
                           const double *x_z,
                           uintptr_t n_x,
                           struct CsdResult **out);

// Runs the sharp regression discontinuity test on a pooled sample,
// splitting at the configured cutoff and testing dominance there.
//
// # Safety
// As for [`csdtest_run`], with `w`/`z` pointing to `n` readable doubles.
enum CsdStatus csdtest_run_rdd(const struct CsdConfig *config,
                               const double *w,
                               const double *z,
                               uintptr_t n,
                               struct CsdResult **out);

// Releases a result handle.
//
// # Safety
// `result` must come from a successful run and not be freed twice; null
// is a no-op.
void csdtest_result_free(struct CsdResult *result);

// Number of per-target entries in the result.
//
// # Safety
// `result` must be a live result handle.
uintptr_t csdtest_result_num_targets(const struct CsdResult *result);

// 1 when any target rejects, else 0.
//
// # Safety
// `result` must be a live result handle.
int32_t csdtest_result_overall_reject(const struct CsdResult *result);

// Copies the summary of target `index` into `*out`.
//
// # Safety
// `result` must be a live result handle and `out` a valid destination.
enum CsdStatus csdtest_result_target(const struct CsdResult *result,
                                     uintptr_t index,
                                     struct CsdTargetSummary *out);

// Exact data-independent critical value for the KS statistic.
//
// # Safety
// `out` must be a valid destination pointer.
enum CsdStatus csdtest_critical_value(uintptr_t q_y, uintptr_t q_x, double alpha, double *out);

// Limiting critical value of the scaled statistic, `sqrt(-ln(alpha)/2)`.
//
// # Safety
// `out` must be a valid destination pointer.
enum CsdStatus csdtest_limiting_critical_value(double alpha, double *out);

// Data-dependent effective sample size for one sample at a target point.
//
// # Safety
// `w` and `z` must point to `n` readable doubles; `out` must be valid.
enum CsdStatus csdtest_tune(const double *w,
                            const double *z,
                            uintptr_t n,
                            double z0,
                            uintptr_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
