#ifndef EWI_NLS_H
#define EWI_NLS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EwiStatus {
  EWI_STATUS_OK = 0,
  EWI_STATUS_NULL_POINTER = 1,
  EWI_STATUS_INVALID_ARGUMENT = 2,
  EWI_STATUS_BLOW_UP = 3,
  EWI_STATUS_DOMAIN = 4,
  EWI_STATUS_NOT_IMPLEMENTED = 5,
  EWI_STATUS_PANIC = 6,
  EWI_STATUS_INTERNAL = 7,
} EwiStatus;

typedef enum EwiScheme {
  EWI_SCHEME_EWI_FS = 0,
  EWI_SCHEME_EWI_EFP = 1,
  EWI_SCHEME_EWI_FP = 2,
  EWI_SCHEME_LIE_TROTTER = 3,
  EWI_SCHEME_STRANG = 4,
} EwiScheme;

typedef enum EwiPotentialKind {
  EWI_POTENTIAL_KIND_NONE = 0,
  // `params[0]`.
  EWI_POTENTIAL_KIND_CONSTANT = 1,
  // Depth `params[0]` on `(params[1], params[2])`.
  EWI_POTENTIAL_KIND_BOX = 2,
  // `|x - centre|^params[0]`.
  EWI_POTENTIAL_KIND_POWER = 3,
  // Periodic linear interpolation of `potential_values`.
  EWI_POTENTIAL_KIND_SAMPLED = 4,
} EwiPotentialKind;

typedef enum EwiNonlinearityKind {
  EWI_NONLINEARITY_KIND_NONE = 0,
  // `params[0] rho^params[1]`.
  EWI_NONLINEARITY_KIND_POWER = 1,
  // `params[0] rho^params[1] + params[2] rho^params[3]`.
  EWI_NONLINEARITY_KIND_TWO_POWER = 2,
  // `params[0] rho^params[1] ln(rho)`.
  EWI_NONLINEARITY_KIND_LOG_POWER = 3,
} EwiNonlinearityKind;

typedef enum EwiDatum {
  EWI_DATUM_TYPE1_H2 = 0,
  EWI_DATUM_TYPE2_SMOOTH = 1,
  EWI_DATUM_H3_DATUM = 2,
} EwiDatum;

// Opaque solver handle.
typedef struct EwiSolver EwiSolver;

// Problem and discretization. `fs_oversample = 0` selects the default.
typedef struct EwiConfig {
  enum EwiScheme scheme;
  double a;
  double b;
  size_t n;
  double tau;
  double t_final;
  enum EwiPotentialKind potential;
  double potential_params[3];
  const double *potential_values;
  size_t potential_len;
  enum EwiNonlinearityKind nonlinearity;
  double nonlinearity_params[4];
  size_t fs_oversample;
} EwiConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a solver with a zero initial field.
//
// # Safety
// `config` must point to a valid `EwiConfig`; `out` must be writable.
enum EwiStatus ewi_solver_new(const struct EwiConfig *config, struct EwiSolver **out);

// Releases a solver. Null is accepted.
//
// # Safety
// `solver` must come from [`ewi_solver_new`] and not be used afterwards.
void ewi_solver_free(struct EwiSolver *solver);

// Loads a built-in initial datum and resets the clock.
//
// # Safety
// `solver` must be a live handle.
enum EwiStatus ewi_solver_set_datum(struct EwiSolver *solver, enum EwiDatum datum);

// Loads `n` nodal values at `x_0 .. x_{n-1}` and resets the clock.
//
// # Safety
// `values` must hold `2 n` doubles.
enum EwiStatus ewi_solver_set_nodal(struct EwiSolver *solver, const double *values, size_t n);

// Loads `n` spectral coefficients and resets the clock.
//
// # Safety
// `coeffs` must hold `2 n` doubles.
enum EwiStatus ewi_solver_set_coeffs(struct EwiSolver *solver, const double *coeffs, size_t n);

// Advances `count` steps.
//
// # Safety
// `solver` must be a live handle.
enum EwiStatus ewi_solver_step(struct EwiSolver *solver, size_t count);

// Advances to the configured final time. Does nothing if already there.
//
// # Safety
// `solver` must be a live handle.
enum EwiStatus ewi_solver_evolve(struct EwiSolver *solver);

// Number of grid points `N`.
//
// # Safety
// `solver` must be a live handle or null (returns 0).
size_t ewi_solver_modes(const struct EwiSolver *solver);

// Steps taken since the field was last set.
//
// # Safety
// `solver` must be a live handle or null (returns 0).
size_t ewi_solver_step_index(const struct EwiSolver *solver);

// Copies the `n = N` spectral coefficients into `out` (`2 n` doubles).
//
// # Safety
// `out` must hold `2 n` doubles.
enum EwiStatus ewi_solver_coeffs(const struct EwiSolver *solver, double *out, size_t n);

// Copies the `n = N` nodal values into `out` (`2 n` doubles).
//
// # Safety
// `out` must hold `2 n` doubles.
enum EwiStatus ewi_solver_nodal(const struct EwiSolver *solver, double *out, size_t n);

// Discrete mass `h sum |psi_j|^2`.
//
// # Safety
// `out` must be writable.
enum EwiStatus ewi_solver_mass(const struct EwiSolver *solver, double *out);

// Sobolev norm of order `alpha >= 0`.
//
// # Safety
// `out` must be writable.
enum EwiStatus ewi_solver_norm(const struct EwiSolver *solver, double alpha, double *out);

// Least-squares order of `(steps[i], errors[i])`, steps strictly
// decreasing.
//
// # Safety
// `steps` and `errors` must hold `len` doubles; `slope` must be writable.
enum EwiStatus ewi_fit_order(const double *steps, const double *errors, size_t len, double *slope);

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *ewi_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EWI_NLS_H */
