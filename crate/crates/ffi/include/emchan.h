#ifndef EMCHAN_H
#define EMCHAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum EmchanStatus {
  EMCHAN_STATUS_OK = 0,
  EMCHAN_STATUS_NULL_POINTER = 1,
  EMCHAN_STATUS_INVALID_ARGUMENT = 2,
  EMCHAN_STATUS_DOMAIN = 3,
  EMCHAN_STATUS_SINGULAR = 4,
  EMCHAN_STATUS_NO_CONVERGENCE = 5,
  EMCHAN_STATUS_INTERNAL = 6,
  EMCHAN_STATUS_PANIC = 7,
} EmchanStatus;

/**
 * Opaque radiation operator between the Tx and Rx balls.
 */
typedef struct EmchanOperator EmchanOperator;

/**
 * Complex number laid out as two doubles.
 */
typedef struct EmchanComplex {
  double re;
  double im;
} EmchanComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *emchan_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`) and returns the full message length
 * without the terminator; 0 when no error has been recorded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t emchan_last_error(char *buf, size_t len);

/**
 * dBm to watts, with 30 dBm = 1.
 */
double emchan_dbm_to_power(double dbm);

/**
 * Builds the radiation operator for Tx radius `r_t`, Rx radius `r_r` and
 * centre distance `distance` (metres) in vacuum at `frequency` (Hz).
 * `n_trunc` = 0 selects the default truncation ⌈kR_t⌉ + 10.
 *
 * # Safety
 * `out_handle` must be a valid pointer; the handle written there is freed
 * with `emchan_operator_free`.
 */
enum EmchanStatus emchan_operator_new(double r_t,
                                      double r_r,
                                      double distance,
                                      double frequency,
                                      size_t n_trunc,
                                      struct EmchanOperator **out_handle);

/**
 * Frees an operator; null is ignored.
 *
 * # Safety
 * `handle` must come from `emchan_operator_new` and not be used afterwards.
 */
void emchan_operator_free(struct EmchanOperator *handle);

/**
 * Number of modes P_max = 2N(N+2) held by the operator.
 *
 * # Safety
 * `handle` and `out_count` must be valid pointers.
 */
enum EmchanStatus emchan_operator_mode_count(const struct EmchanOperator *handle,
                                             size_t *out_count);

/**
 * Writes the first `len` singular values σ_p (V/A) in mode order.
 *
 * # Safety
 * `handle` must be valid and `out_sigma` must hold `len` doubles.
 */
enum EmchanStatus emchan_operator_singular_values(const struct EmchanOperator *handle,
                                                  double *out_sigma,
                                                  size_t len);

/**
 * Field at `point` (x, y, z in metres) radiated by the mode coefficients
 * `j[0..len]`, written as Cartesian components to `out_field[0..3]`.
 *
 * # Safety
 * `handle` must be valid, `j` must hold `len` values, `point` three doubles
 * and `out_field` three complex values.
 */
enum EmchanStatus emchan_operator_radiate(const struct EmchanOperator *handle,
                                          const struct EmchanComplex *j,
                                          size_t len,
                                          const double *point,
                                          struct EmchanComplex *out_field);

/**
 * Water-filling over `len` modes with gains `sigma`: writes |j_p|² to
 * `out_power` and the water level and active-mode count to the scalars.
 *
 * # Safety
 * `sigma` and `out_power` must hold `len` doubles; the scalar outputs must
 * be valid pointers.
 */
enum EmchanStatus emchan_water_fill(const double *sigma,
                                    size_t len,
                                    double p_t,
                                    double noise,
                                    double *out_power,
                                    double *out_water_level,
                                    size_t *out_dof);

/**
 * Minimises ‖Bj − s‖² subject to ‖j‖² ≤ P_T for the row-major `rows` ×
 * `cols` matrix `b` and targets `s[0..rows]`. Writes j to `out_j[0..cols]`,
 * the multiplier to `out_lambda` and Σ|Bj − s|²/Σ|s|² to `out_err`.
 *
 * # Safety
 * Array arguments must hold the stated number of elements and the scalar
 * outputs must be valid pointers.
 */
enum EmchanStatus emchan_solve_p1(const struct EmchanComplex *b,
                                  size_t rows,
                                  size_t cols,
                                  const struct EmchanComplex *s,
                                  double p_t,
                                  struct EmchanComplex *out_j,
                                  double *out_lambda,
                                  double *out_err);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMCHAN_H */
