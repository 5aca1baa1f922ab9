#ifndef DDSIM_H
#define DDSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum DdsimStatus {
  DDSIM_STATUS_OK = 0,
  DDSIM_STATUS_NULL_POINTER = 1,
  DDSIM_STATUS_INVALID_ARGUMENT = 2,
  DDSIM_STATUS_COMPUTATION_FAILED = 3,
  DDSIM_STATUS_PANIC = 4,
} DdsimStatus;

/**
 * Sequence families accepted by [`ddsim_order_sweep`].
 */
typedef enum DdsimSequence {
  DDSIM_SEQUENCE_CPMG = 0,
  DDSIM_SEQUENCE_XY8 = 1,
} DdsimSequence;

/**
 * Gates accepted by [`ddsim_gate_fidelity`].
 */
typedef enum DdsimGate {
  DDSIM_GATE_HALF_PI = 0,
  DDSIM_GATE_PI = 1,
  DDSIM_GATE_CPMG8 = 2,
  DDSIM_GATE_XY8 = 3,
} DdsimGate;

/**
 * Noise, drive and ensemble settings.
 */
typedef struct DdsimModel DdsimModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ddsim_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on this thread.
 */
const char *ddsim_last_error(void);

/**
 * Create a model. Frequencies are in Hz (the 2π factor is applied here),
 * times in seconds. Returns null on invalid input.
 */
struct DdsimModel *ddsim_model_new(double sigma_delta_hz,
                                   double tau_c_s,
                                   double sigma_eps,
                                   double tau_omega_s,
                                   double rabi_hz);

/**
 * Release a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a pointer from [`ddsim_model_new`] not yet freed.
 */
void ddsim_model_free(struct DdsimModel *model);

/**
 * Ensemble size, master seed and worker threads (0 = default pool).
 *
 * # Safety
 * `model` must be a live handle.
 */
enum DdsimStatus ddsim_model_set_ensemble(struct DdsimModel *model,
                                          size_t n_realizations,
                                          uint64_t seed,
                                          size_t threads);

/**
 * Monte-Carlo differential signal of an order sweep at spacing `tau_s`;
 * `sequence` is a [`DdsimSequence`] value.
 * `prep_phase_rad` sets the phase of the preparation pulse relative to the
 * refocusing frame (0 for the X initial state, π/2 for Y). Writes `len`
 * values to `out_signal` and `out_stderr`, in ascending order of
 * `n_values` with duplicates removed; `*out_len` receives the count.
 *
 * # Safety
 * Pointers must be valid for `len` elements; `out_len` must be writable.
 */
enum DdsimStatus ddsim_order_sweep(const struct DdsimModel *model,
                                   int32_t sequence,
                                   double tau_s,
                                   double prep_phase_rad,
                                   const size_t *n_values,
                                   size_t len,
                                   double *out_signal,
                                   double *out_stderr,
                                   size_t *out_len);

/**
 * Closed-form OU decay exponent for `n` ideal π pulses spaced `tau_s`.
 * `sigma_delta` is in rad/s.
 *
 * # Safety
 * `out` must be writable.
 */
enum DdsimStatus ddsim_gamma_ou(uint64_t n,
                                double tau_s,
                                double sigma_delta,
                                double tau_c_s,
                                double *out);

/**
 * Fidelity of a [`DdsimGate`] under static relative amplitude error `eps` and
 * detuning `delta_rad_s`; sequence gates use spacing `tau_s`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum DdsimStatus ddsim_gate_fidelity(const struct DdsimModel *model,
                                     int32_t gate,
                                     double eps,
                                     double delta_rad_s,
                                     double tau_s,
                                     double *out);

/**
 * Simple-exponential fit `A·exp(−t/T2)`.
 *
 * # Safety
 * `t` and `y` must hold `len` values; outputs must be writable.
 */
enum DdsimStatus ddsim_fit_simple(const double *t,
                                  const double *y,
                                  size_t len,
                                  double *out_t2,
                                  double *out_t2_stderr,
                                  double *out_r_squared);

/**
 * Correlation-time estimate from `(n_i, tau_i, signal_i)` with `sigma_delta`
 * (rad/s) held fixed, best of `restarts` random starts.
 *
 * # Safety
 * Input arrays must hold `len` values; outputs must be writable.
 */
enum DdsimStatus ddsim_estimate_tau_c(const uint64_t *n_pulses,
                                      const double *tau_s,
                                      const double *signal,
                                      size_t len,
                                      double sigma_delta,
                                      size_t restarts,
                                      uint64_t seed,
                                      double *out_tau_c,
                                      double *out_r_squared);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDSIM_H */
