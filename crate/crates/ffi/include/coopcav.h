#ifndef COOPCAV_H
#define COOPCAV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CoopStatus {
  COOP_STATUS_OK = 0,
  COOP_STATUS_NULL_POINTER = 1,
  COOP_STATUS_INVALID_ARGUMENT = 2,
  COOP_STATUS_SOLVER_FAILURE = 3,
  COOP_STATUS_PANIC = 4,
  COOP_STATUS_BUFFER_TOO_SMALL = 5,
} CoopStatus;

/**
 * System parameters being assembled.
 */
typedef struct CoopParams CoopParams;

/**
 * An emission spectrum on an ascending frequency grid.
 */
typedef struct CoopSpectrum CoopSpectrum;

/**
 * A solved steady state together with its generator.
 */
typedef struct CoopSteadyState CoopSteadyState;

/**
 * Scalar observables of a steady state. Undefined values are NaN.
 */
typedef struct CoopObservables {
  double n;
  double z;
  double nj;
  double g2;
  double residual;
  double truncation_tail;
  double spectral_gap;
} CoopObservables;

/**
 * Cooperative fraction and its ingredients. Undefined values are NaN.
 */
typedef struct CoopCooperativity {
  double cf;
  double shared_n;
  double independent_n_total;
  double reference;
} CoopCooperativity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL terminated).
 *
 * Returns the buffer size needed including the terminator, or 0 when there
 * is no error. Nothing is written when `buf` is null or too small.
 *
 * # Safety
 * `buf` must be null or valid for `capacity` bytes.
 */
size_t coop_last_error_message(char *buf, size_t capacity);

/**
 * Library version as a static NUL-terminated string.
 */
const char *coop_version(void);

/**
 * Resonant, identical emitters. Use [`coop_params_set_detuning`] to detune.
 *
 * # Safety
 * `out` must be null or valid for a pointer write.
 */
enum CoopStatus coop_params_new(size_t n_emitters,
                                double g,
                                double kappa,
                                double pump,
                                double dephasing,
                                size_t n_max,
                                struct CoopParams **out);

/**
 * # Safety
 * `params` must be null or a live handle from [`coop_params_new`].
 */
enum CoopStatus coop_params_set_detuning(struct CoopParams *params,
                                         size_t emitter,
                                         double detuning);

/**
 * # Safety
 * `params` must be null or a live handle; it is invalid afterwards.
 */
void coop_params_free(struct CoopParams *params);

/**
 * Solve for the steady state. `tol <= 0` selects the default residual bound.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for a pointer write.
 */
enum CoopStatus coop_steady_state_solve(const struct CoopParams *params,
                                        double tol,
                                        struct CoopSteadyState **out);

/**
 * # Safety
 * `state` must be a live handle and `out` valid for a write.
 */
enum CoopStatus coop_steady_state_observables(const struct CoopSteadyState *state,
                                              struct CoopObservables *out);

/**
 * # Safety
 * `state` must be null or a live handle; it is invalid afterwards.
 */
void coop_steady_state_free(struct CoopSteadyState *state);

/**
 * Shared-cavity output against one cavity per emitter, same truncation.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for a write.
 */
enum CoopStatus coop_cooperative_fraction(const struct CoopParams *params,
                                          struct CoopCooperativity *out);

/**
 * Emission spectrum of a steady state with an automatically sized horizon.
 *
 * # Safety
 * `state` must be a live handle and `out` valid for a pointer write.
 */
enum CoopStatus coop_spectrum_compute(const struct CoopSteadyState *state,
                                      struct CoopSpectrum **out);

/**
 * Number of frequency samples; 0 for a null handle.
 *
 * # Safety
 * `spectrum` must be null or a live handle.
 */
size_t coop_spectrum_len(const struct CoopSpectrum *spectrum);

/**
 * Copy frequencies and spectral density into caller buffers of `capacity`
 * elements each.
 *
 * # Safety
 * `omega` and `density` must be valid for `capacity` writes.
 */
enum CoopStatus coop_spectrum_copy(const struct CoopSpectrum *spectrum,
                                   double *omega,
                                   double *density,
                                   size_t capacity);

/**
 * Full width at half maximum of the tallest peak; NaN when undefined.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` valid for a write.
 */
enum CoopStatus coop_spectrum_fwhm(const struct CoopSpectrum *spectrum, double *out);

/**
 * # Safety
 * `spectrum` must be null or a live handle; it is invalid afterwards.
 */
void coop_spectrum_free(struct CoopSpectrum *spectrum);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COOPCAV_H */
