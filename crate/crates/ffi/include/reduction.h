#ifndef REDUCTION_H
#define REDUCTION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ReductionStatus {
  REDUCTION_STATUS_OK = 0,
  REDUCTION_STATUS_NULL_POINTER = 1,
  REDUCTION_STATUS_INVALID_ARGUMENT = 2,
  REDUCTION_STATUS_DIMENSION_MISMATCH = 3,
  REDUCTION_STATUS_NOT_NORMALIZED = 4,
  REDUCTION_STATUS_BEYOND_COLLAPSE = 5,
  REDUCTION_STATUS_BUFFER_TOO_SMALL = 6,
  REDUCTION_STATUS_PANIC = 7,
} ReductionStatus;

typedef enum ReductionModelKind {
  REDUCTION_MODEL_KIND_ASYMPTOTIC = 0,
  REDUCTION_MODEL_KIND_FINITE_TIME = 1,
} ReductionModelKind;

/**
 * Opaque model handle.
 */
typedef struct ReductionModel ReductionModel;

/**
 * Initial energy statistics of a model.
 */
typedef struct ReductionMoments {
  double energy;
  double variance;
  double entropy;
  /**
   * `1/V₀`, infinite for an energy eigenstate.
   */
  double reduction_time;
} ReductionMoments;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. Owned by the library.
 */
const char *reduction_last_error(void);

/**
 * Builds a model from level energies and multiplicities and an initial
 * state given as separate real and imaginary parts. `kind` is a
 * [`ReductionModelKind`] value; `horizon` is ignored for the asymptotic model.
 *
 * # Safety
 * Array arguments must be valid for their stated lengths and `out` must be writable.
 */
enum ReductionStatus reduction_model_new(const double *energies,
                                         const size_t *multiplicities,
                                         size_t n_levels,
                                         const double *psi_re,
                                         const double *psi_im,
                                         size_t dimension,
                                         uint32_t kind,
                                         double sigma,
                                         double horizon,
                                         struct ReductionModel **out);

/**
 * # Safety
 * `model` must come from [`reduction_model_new`] and not have been freed. Null is a no-op.
 */
void reduction_model_free(struct ReductionModel *model);

/**
 * # Safety
 * `model` must be a live handle.
 */
size_t reduction_model_n_levels(const struct ReductionModel *model);

/**
 * # Safety
 * `model` must be a live handle.
 */
size_t reduction_model_dimension(const struct ReductionModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum ReductionStatus reduction_model_moments(const struct ReductionModel *model,
                                             struct ReductionMoments *out);

/**
 * Initial level probabilities `πᵢ`.
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum ReductionStatus reduction_model_probabilities(const struct ReductionModel *model,
                                                   double *out,
                                                   size_t len);

/**
 * Conditional level probabilities given `ξₜ = xi`.
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum ReductionStatus reduction_conditional_probabilities(const struct ReductionModel *model,
                                                         double xi,
                                                         double t,
                                                         double *out,
                                                         size_t len);

/**
 * State `Σᵢ √pᵢ e^{−iEᵢt} |φᵢ⟩` split into real and imaginary parts.
 *
 * # Safety
 * `probabilities` must hold `n_levels` values; the outputs `len` each.
 */
enum ReductionStatus reduction_state_vector(const struct ReductionModel *model,
                                            const double *probabilities,
                                            size_t n_levels,
                                            double t,
                                            double *out_re,
                                            double *out_im,
                                            size_t len);

/**
 * Simulates path `path_index` of the ensemble seeded by `seed` on
 * `steps` intervals of `[0, t_end]`, writing `ξ`, `H` and `V` at all
 * `steps + 1` grid points. The finite-time model requires `t_end = T`.
 *
 * # Safety
 * Each output must be valid for `len` writes; `terminal_level` may be null.
 */
enum ReductionStatus reduction_simulate_path(const struct ReductionModel *model,
                                             double t_end,
                                             size_t steps,
                                             uint64_t seed,
                                             uint64_t path_index,
                                             double *out_xi,
                                             double *out_h,
                                             double *out_v,
                                             size_t len,
                                             size_t *terminal_level);

/**
 * Effective coupling `σₜ` of the model at time `t`.
 *
 * # Safety
 * `model` must be a live handle.
 */
double reduction_model_sigma_t(const struct ReductionModel *model, double t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REDUCTION_H */
