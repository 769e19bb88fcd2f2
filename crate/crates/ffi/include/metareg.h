#ifndef METAREG_H
#define METAREG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every function.
typedef enum MrStatus {
  MR_STATUS_OK = 0,
  MR_STATUS_NULL_POINTER = 1,
  MR_STATUS_INVALID_ARGUMENT = 2,
  MR_STATUS_DOMAIN = 3,
  MR_STATUS_SHAPE = 4,
  MR_STATUS_OUT_OF_RANGE = 5,
  MR_STATUS_NO_ROOT = 6,
  MR_STATUS_NO_CONVERGENCE = 7,
  MR_STATUS_NUMERIC = 8,
  MR_STATUS_IO = 9,
  MR_STATUS_PANIC = 10,
} MrStatus;

// Update rules.
typedef enum MrRule {
  MR_RULE_EXACT = 0,
  MR_RULE_ALTERNATING = 1,
  MR_RULE_SC_EXACT = 2,
  MR_RULE_SC_ALTERNATING = 3,
  MR_RULE_SCALAR_EXACT = 4,
  MR_RULE_SCALAR_ALTERNATING = 5,
} MrRule;

// Opaque divergence handle.
typedef struct MrDivergence MrDivergence;

// Opaque optimizer handle: configuration plus current state.
typedef struct MrOptimizer MrOptimizer;

// Optimizer settings. `lambda` is read only by the strongly convex rules;
// `clip_factor <= 0` disables growth clipping.
typedef struct MrOptimizerOptions {
  enum MrRule rule;
  double alpha0;
  double lambda;
  double clip_factor;
} MrOptimizerOptions;

// Safeguard counts of the most recent step.
typedef struct MrDiagnostics {
  size_t out_of_domain;
  size_t clipped;
  size_t boxed;
  size_t floored;
  double max_ratio;
} MrDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL terminated,
// truncated to `len`). Returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t mr_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *mr_version(void);

// Creates a builtin divergence by name: kl, rkl, hellinger, chi2, adagrad or wngrad.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum MrStatus mr_divergence_new(const char *name, struct MrDivergence **out);

// Releases a divergence. Null is ignored.
//
// # Safety
// `d` must come from [`mr_divergence_new`] and not be used afterwards.
void mr_divergence_free(struct MrDivergence *d);

// `φ(t)`.
//
// # Safety
// `d` must be a live handle and `out` writable.
enum MrStatus mr_divergence_phi(const struct MrDivergence *d, double t, double *out);

// `φ'(t)`.
//
// # Safety
// `d` must be a live handle and `out` writable.
enum MrStatus mr_divergence_phi_prime(const struct MrDivergence *d, double t, double *out);

// `(φ')⁻¹(y)` on `[1, ∞)`; `MR_STATUS_OUT_OF_RANGE` when `y` has no preimage.
//
// # Safety
// `d` must be a live handle and `out` writable.
enum MrStatus mr_divergence_phi_prime_inverse(const struct MrDivergence *d, double y, double *out);

// Strong-convexity constant on `[1, z_max]`.
//
// # Safety
// `d` must be a live handle and `out` writable.
enum MrStatus mr_divergence_gamma(const struct MrDivergence *d, double z_max, double *out);

// Lipschitz constant of `φ'` on `[1, ∞)`.
//
// # Safety
// `d` must be a live handle and `out` writable.
enum MrStatus mr_divergence_smoothness(const struct MrDivergence *d, double *out);

// Exact-rule rate for auxiliary rate `eta` and squared gradient `g_sq`.
//
// # Safety
// `d` must be a live handle and `out` writable.
enum MrStatus mr_solve_exact_rate(const struct MrDivergence *d,
                                  double eta,
                                  double g_sq,
                                  double *out);

// Strongly convex exact-rule rate.
//
// # Safety
// `d` must be a live handle and `out` writable.
enum MrStatus mr_solve_sc_exact_rate(const struct MrDivergence *d,
                                     double alpha_t,
                                     double g_sq,
                                     double lambda,
                                     double *out);

// Coordinate-wise `max(alpha_new, clip_factor * alpha_prev)` into `out`.
//
// # Safety
// The three arrays must hold `len` values.
enum MrStatus mr_apply_growth_clip(const double *alpha_new,
                                   const double *alpha_prev,
                                   size_t len,
                                   double clip_factor,
                                   double *out);

// Coordinate-wise clamp of `alpha_star` to `[lo, hi]` into `out`.
//
// # Safety
// The four arrays must hold `len` values.
enum MrStatus mr_project_rate_box(const double *alpha_star,
                                  const double *lo,
                                  const double *hi,
                                  size_t len,
                                  double *out);

// Default options: alternating rule, `alpha0 = 0.5`, clip factor 0.5, no lambda.
struct MrOptimizerOptions mr_optimizer_options_default(void);

// Creates an optimizer at `x0` (length `dim`). The divergence is copied, so
// `d` may be freed afterwards.
//
// # Safety
// `d` must be a live handle, `x0` must hold `dim` values and `out` be writable.
enum MrStatus mr_optimizer_new(const struct MrDivergence *d,
                               struct MrOptimizerOptions options,
                               const double *x0,
                               size_t dim,
                               struct MrOptimizer **out);

// Releases an optimizer. Null is ignored.
//
// # Safety
// `opt` must come from [`mr_optimizer_new`] and not be used afterwards.
void mr_optimizer_free(struct MrOptimizer *opt);

// Sets per-coordinate rate bounds (length `dim`, or 1 for a shared box).
//
// # Safety
// `opt` must be a live handle; `lo` and `hi` must hold `len` values.
enum MrStatus mr_optimizer_set_rate_box(struct MrOptimizer *opt,
                                        const double *lo,
                                        const double *hi,
                                        size_t len);

// Advances one step with gradient `grad` (length `dim`). On error the state
// is unchanged.
//
// # Safety
// `opt` must be a live handle and `grad` hold `dim` values.
enum MrStatus mr_optimizer_step(struct MrOptimizer *opt, const double *grad, size_t dim);

// Problem dimension.
//
// # Safety
// `opt` must be a live handle and `out` writable.
enum MrStatus mr_optimizer_dim(const struct MrOptimizer *opt, size_t *out);

// Number of rates: `dim`, or 1 for the scalar rules.
//
// # Safety
// `opt` must be a live handle and `out` writable.
enum MrStatus mr_optimizer_rate_count(const struct MrOptimizer *opt, size_t *out);

// Steps taken so far.
//
// # Safety
// `opt` must be a live handle and `out` writable.
enum MrStatus mr_optimizer_iteration(const struct MrOptimizer *opt, size_t *out);

// Copies the current iterate into `out` (length `dim`).
//
// # Safety
// `opt` must be a live handle and `out` hold `len` values.
enum MrStatus mr_optimizer_get_x(const struct MrOptimizer *opt, double *out, size_t len);

// Copies the current rates into `out` (length from [`mr_optimizer_rate_count`]).
//
// # Safety
// `opt` must be a live handle and `out` hold `len` values.
enum MrStatus mr_optimizer_get_rates(const struct MrOptimizer *opt, double *out, size_t len);

// Safeguard counts of the most recent step.
//
// # Safety
// `opt` must be a live handle and `out` writable.
enum MrStatus mr_optimizer_diagnostics(const struct MrOptimizer *opt, struct MrDiagnostics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* METAREG_H */
