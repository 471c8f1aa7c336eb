#ifndef TMV_H
#define TMV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TmvStatus {
  TMV_STATUS_OK = 0,
  TMV_STATUS_INVALID_ARGUMENT = 1,
  TMV_STATUS_PARSE = 2,
  TMV_STATUS_FIT = 3,
  TMV_STATUS_NUMERICAL = 4,
  TMV_STATUS_IO = 5,
  TMV_STATUS_PANIC = 6,
} TmvStatus;

/**
 * Per-mode shares of a fitted study.
 */
typedef struct TmvDecomposition TmvDecomposition;

/**
 * Fitted template and per-curve parameters.
 */
typedef struct TmvFit TmvFit;

/**
 * Sampled curves on a shared grid.
 */
typedef struct TmvStudy TmvStudy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tmv_version(void);

/**
 * Message for the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next `tmv_*` call on the same thread.
 */
const char *tmv_last_error(void);

/**
 * Load a `curve_id,t,z[,weight]` CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum TmvStatus tmv_study_load_csv(const char *path, struct TmvStudy **out);

/**
 * Build a study from `n_curves` rows of `n_grid` values, row-major.
 * `weights` may be null for unit weights.
 *
 * # Safety
 * `grid` must hold `n_grid` values, `values` `n_curves * n_grid` values and
 * `weights`, if not null, `n_curves` values. `out` must be writable.
 */
enum TmvStatus tmv_study_from_arrays(const double *grid,
                                     size_t n_grid,
                                     const double *values,
                                     size_t n_curves,
                                     const double *weights,
                                     struct TmvStudy **out);

/**
 * # Safety
 * `study` must be a live handle and `out` writable.
 */
enum TmvStatus tmv_study_curve_count(const struct TmvStudy *study, size_t *out);

/**
 * # Safety
 * `study` must be null or a handle not yet freed.
 */
void tmv_study_free(struct TmvStudy *study);

/**
 * Fit a polynomial template of `degree` and per-curve parameters. `modes`
 * is a comma-separated list of `gen_spec`, `horizontal`, `vertical`; null
 * selects all three.
 *
 * # Safety
 * `study` must be a live handle, `modes` null or NUL-terminated, `out` writable.
 */
enum TmvStatus tmv_fit(const struct TmvStudy *study,
                       const char *modes,
                       size_t degree,
                       uint64_t seed,
                       struct TmvFit **out);

/**
 * Template coefficients in ascending powers.
 *
 * # Safety
 * `fit` must be a live handle, `buf` null or writable for `cap` values,
 * `len` writable.
 */
enum TmvStatus tmv_fit_template_coefficients(const struct TmvFit *fit,
                                             double *buf,
                                             size_t cap,
                                             size_t *len);

/**
 * Parameter vector of curve `curve`, in mode order.
 *
 * # Safety
 * As for [`tmv_fit_template_coefficients`].
 */
enum TmvStatus tmv_fit_theta(const struct TmvFit *fit,
                             size_t curve,
                             double *buf,
                             size_t cap,
                             size_t *len);

/**
 * Unweighted residual sum of squares.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum TmvStatus tmv_fit_sse(const struct TmvFit *fit, double *out);

/**
 * # Safety
 * `fit` must be null or a handle not yet freed.
 */
void tmv_fit_free(struct TmvFit *fit);

/**
 * Arc length along mode `mode` of the fitted model between parameter values
 * `a` and `b`, other parameters held at `fixed` (`n_fixed` values).
 *
 * # Safety
 * `fit` must be a live handle, `fixed` readable for `n_fixed` values, `out` writable.
 */
enum TmvStatus tmv_arcdist(const struct TmvFit *fit,
                           size_t mode,
                           double a,
                           double b,
                           const double *fixed,
                           size_t n_fixed,
                           double *out);

/**
 * Decompose the fitted variation with blend weight `gamma` and default
 * origin selection.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum TmvStatus tmv_decompose(const struct TmvFit *fit, double gamma, struct TmvDecomposition **out);

/**
 * Percentage share of mode `mode`, or of all modes for `"total"`.
 *
 * # Safety
 * `d` must be a live handle, `mode` NUL-terminated, `out` writable.
 */
enum TmvStatus tmv_decomposition_rss(const struct TmvDecomposition *d,
                                     const char *mode,
                                     double *out);

/**
 * Model sum of squares of mode `mode`, or of all modes for `"total"`.
 *
 * # Safety
 * As for [`tmv_decomposition_rss`].
 */
enum TmvStatus tmv_decomposition_ssm(const struct TmvDecomposition *d,
                                     const char *mode,
                                     double *out);

/**
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum TmvStatus tmv_decomposition_sse(const struct TmvDecomposition *d, double *out);

/**
 * # Safety
 * `d` must be null or a handle not yet freed.
 */
void tmv_decomposition_free(struct TmvDecomposition *d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TMV_H */
