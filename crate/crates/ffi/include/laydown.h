#ifndef LAYDOWN_H
#define LAYDOWN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LdStatus {
  LD_STATUS_OK = 0,
  LD_STATUS_CONFIG = 1,
  LD_STATUS_PRECONDITION = 2,
  LD_STATUS_INFEASIBLE = 3,
  LD_STATUS_NON_CONVERGENCE = 4,
  LD_STATUS_NUMERICAL = 5,
  LD_STATUS_IO = 6,
  LD_STATUS_NULL_POINTER = 7,
  LD_STATUS_PANIC = 8,
} LdStatus;

/**
 * Particle ensemble together with its configuration.
 */
typedef struct LdEnsemble LdEnsemble;

/**
 * Kinetic solver on a phase-space grid, holding the current density.
 */
typedef struct LdKinetic LdKinetic;

/**
 * Normalized potential.
 */
typedef struct LdPotential LdPotential;

/**
 * Hypocoercivity constants. `zeta` is NaN when no weight is used.
 */
typedef struct LdConstants {
  double eps1;
  double xi;
  double gamma1;
  double gamma2;
  double lambda_kappa;
  double kappa_max;
  double zeta;
} LdConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length without the NUL.
 * Returns 0 when the last call succeeded. `buf` may be null to query the length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ld_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ld_version(void);

/**
 * `K (1 + |x|^2)^(s/2)`, normalized so that `e^{-V}` has unit mass.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum LdStatus ld_potential_family(double k, double s, struct LdPotential **out);

/**
 * `omega |x|^2 / 2`, normalized.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum LdStatus ld_potential_quadratic(double omega, struct LdPotential **out);

/**
 * # Safety
 * `p` must be null or a handle from `ld_potential_*` not yet freed.
 */
void ld_potential_free(struct LdPotential *p);

/**
 * Value and gradient at `(x, y)`. `grad` may be null.
 *
 * # Safety
 * Pointers must be valid; `grad` must hold two doubles when non-null.
 */
enum LdStatus ld_potential_eval(const struct LdPotential *p,
                                double x,
                                double y,
                                double *value,
                                double *grad);

/**
 * Poincare constant `Lambda` and elliptic constant `C_V` on an `n x n` plane
 * grid, with the angular coupling of `nalpha` cells.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LdStatus ld_estimate_constants(const struct LdPotential *p,
                                    size_t n,
                                    size_t nalpha,
                                    uint64_t seed,
                                    double *lambda,
                                    double *c_v);

/**
 * Evaluates the constant chain for given `Lambda` and `C_V`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LdStatus ld_constants(const struct LdPotential *p,
                           double kappa,
                           double d,
                           double lambda,
                           double c_v,
                           struct LdConstants *out);

/**
 * Ensemble of `n` particles with Gaussian positions of width `sigma` and
 * uniform angles, at time 0.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LdStatus ld_ensemble_new(const struct LdPotential *p,
                              double kappa,
                              double d,
                              double dt,
                              size_t n,
                              uint64_t seed,
                              double sigma,
                              struct LdEnsemble **out);

/**
 * # Safety
 * `e` must be null or a live ensemble handle.
 */
void ld_ensemble_free(struct LdEnsemble *e);

/**
 * Advances by `horizon` time units.
 *
 * # Safety
 * `e` must be a live ensemble handle.
 */
enum LdStatus ld_ensemble_advance(struct LdEnsemble *e, double horizon);

/**
 * # Safety
 * `e` must be a live ensemble handle.
 */
double ld_ensemble_time(const struct LdEnsemble *e);

/**
 * # Safety
 * `e` must be a live ensemble handle.
 */
size_t ld_ensemble_len(const struct LdEnsemble *e);

/**
 * Writes `x, y, alpha` per particle into `out`, which holds `len` doubles.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum LdStatus ld_ensemble_states(const struct LdEnsemble *e, double *out, size_t len);

/**
 * Solver on an `nx x ny x nalpha` grid with the time step at `cfl_fraction` of
 * the stability bound. The density starts at `e^{-V}`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LdStatus ld_kinetic_new(const struct LdPotential *p,
                             size_t nx,
                             size_t ny,
                             size_t nalpha,
                             double d,
                             double kappa,
                             double cfl_fraction,
                             struct LdKinetic **out);

/**
 * # Safety
 * `k` must be null or a live kinetic handle.
 */
void ld_kinetic_free(struct LdKinetic *k);

/**
 * Number of cells; values are ordered with `alpha` fastest, then `y`, then `x`.
 *
 * # Safety
 * `k` must be a live kinetic handle.
 */
size_t ld_kinetic_len(const struct LdKinetic *k);

/**
 * # Safety
 * `k` must be a live kinetic handle.
 */
double ld_kinetic_dt(const struct LdKinetic *k);

/**
 * # Safety
 * `k` must be a live kinetic handle.
 */
double ld_kinetic_mass(const struct LdKinetic *k);

/**
 * # Safety
 * `values` must point to `len` readable doubles.
 */
enum LdStatus ld_kinetic_set_values(struct LdKinetic *k, const double *values, size_t len);

/**
 * # Safety
 * `values` must point to `len` writable doubles.
 */
enum LdStatus ld_kinetic_get_values(const struct LdKinetic *k, double *values, size_t len);

/**
 * Takes `steps` time steps.
 *
 * # Safety
 * `k` must be a live kinetic handle.
 */
enum LdStatus ld_kinetic_step(struct LdKinetic *k, size_t steps);

/**
 * Replaces the density by the stationary state reached from it; the final
 * residual goes to `residual` when non-null.
 *
 * # Safety
 * `k` must be a live kinetic handle; `residual` null or valid.
 */
enum LdStatus ld_kinetic_solve_stationary(struct LdKinetic *k, double tol, double *residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAYDOWN_H */
