#ifndef SPS_LAB_H
#define SPS_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpsStatus {
  SPS_STATUS_OK = 0,
  SPS_STATUS_INVALID_ARGUMENT = 1,
  SPS_STATUS_NOT_CONVERGED = 2,
  SPS_STATUS_VERIFICATION_FAILED = 3,
  SPS_STATUS_NULL_POINTER = 4,
  SPS_STATUS_IO = 5,
  SPS_STATUS_PARSE = 6,
  SPS_STATUS_PANIC = 7,
} SpsStatus;

/**
 * A ground state. Opaque.
 */
typedef struct SpsSolution SpsSolution;

/**
 * A finished eps sweep. Opaque.
 */
typedef struct SpsSweep SpsSweep;

/**
 * Grid and stopping rule for a solve.
 */
typedef struct SpsSolveOptions {
  size_t grid_n;
  double r_max;
  double stretch;
  double tol;
  size_t max_iters;
} SpsSolveOptions;

typedef struct SpsBreakdown {
  /**
   * `int |grad u|^2`
   */
  double a;
  /**
   * `int u^2`
   */
  double b;
  /**
   * Coulomb self-interaction.
   */
  double c;
  /**
   * `int |u|^p`
   */
  double d;
} SpsBreakdown;

typedef struct SpsResiduals {
  double nehari;
  double pohozaev_identity;
  double pohozaev_manifold;
  double ode_sup;
} SpsResiduals;

typedef struct SpsSweepRow {
  double eps;
  /**
   * NaN for the `eps = 0` row.
   */
  double lambda;
  double m_eps;
  double gap;
  double eps_times_b;
  double t_proj;
  double e_dist;
  double decay_rate;
  double energy_at_projection;
  bool converged;
} SpsSweepRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *sps_last_error(void);

/**
 * Static, nul-terminated version string.
 */
const char *sps_version(void);

struct SpsSolveOptions sps_solve_options_default(void);

/**
 * Ground state for exponent `p` and mass `eps`. `opts` may be null for
 * defaults. On `NotConverged` the best iterate is still returned in `out`.
 */
enum SpsStatus sps_solve(double p,
                         double eps,
                         const struct SpsSolveOptions *opts,
                         struct SpsSolution **out);

/**
 * Ground state in the rescaled form for coupling `lambda > 0`.
 */
enum SpsStatus sps_solve_lambda(double p,
                                double lambda,
                                const struct SpsSolveOptions *opts,
                                struct SpsSolution **out);

/**
 * Releases a solution; null is ignored.
 */
void sps_solution_free(struct SpsSolution *sol);

/**
 * Ground-state energy; NaN for a null handle.
 */
double sps_solution_energy(const struct SpsSolution *sol);

double sps_solution_eps(const struct SpsSolution *sol);

bool sps_solution_converged(const struct SpsSolution *sol);

size_t sps_solution_iterations(const struct SpsSolution *sol);

/**
 * Number of grid nodes; 0 for a null handle.
 */
size_t sps_solution_len(const struct SpsSolution *sol);

enum SpsStatus sps_solution_breakdown(const struct SpsSolution *sol, struct SpsBreakdown *out);

/**
 * Copies the radial nodes into `buf` (capacity `len`).
 */
enum SpsStatus sps_solution_nodes(const struct SpsSolution *sol, double *buf, size_t len);

/**
 * Copies the profile values `u(r_i)` into `buf` (capacity `len`).
 */
enum SpsStatus sps_solution_values(const struct SpsSolution *sol, double *buf, size_t len);

/**
 * Recomputes the residuals from the profile. Returns `VerificationFailed`
 * when any exceeds `tol` or the profile is zero; `out` may be null.
 */
enum SpsStatus sps_verify(const struct SpsSolution *sol, double tol, struct SpsResiduals *out);

/**
 * Solution document as JSON; release with [`sps_string_free`].
 */
enum SpsStatus sps_solution_to_json(const struct SpsSolution *sol, char **out);

/**
 * Parses a solution JSON document.
 */
enum SpsStatus sps_solution_from_json(const char *json, struct SpsSolution **out);

/**
 * Releases a string returned by this library; null is ignored.
 */
void sps_string_free(char *s);

/**
 * `eps = lambda^((p-2)/(4(3-p)))`.
 */
enum SpsStatus sps_eps_of_lambda(double lambda, double p, double *out);

/**
 * Sweep over `eps[0..len]` (strictly decreasing, ending with 0) with
 * continuation. `NotConverged` still returns the partial sweep in `out`.
 */
enum SpsStatus sps_sweep(double p,
                         const double *eps,
                         size_t len,
                         const struct SpsSolveOptions *opts,
                         struct SpsSweep **out);

void sps_sweep_free(struct SpsSweep *sweep);

size_t sps_sweep_len(const struct SpsSweep *sweep);

/**
 * Energy of the `eps = 0` reference.
 */
double sps_sweep_m_inf(const struct SpsSweep *sweep);

/**
 * Fitted `log gap / log eps` slope; NaN if it could not be fitted.
 */
double sps_sweep_slope(const struct SpsSweep *sweep);

/**
 * Whether every sweep invariant holds.
 */
bool sps_sweep_pass(const struct SpsSweep *sweep);

enum SpsStatus sps_sweep_row(const struct SpsSweep *sweep, size_t index, struct SpsSweepRow *out);

/**
 * Sweep table as CSV; release with [`sps_string_free`].
 */
enum SpsStatus sps_sweep_to_csv(const struct SpsSweep *sweep, char **out);

/**
 * Sweep summary as JSON; release with [`sps_string_free`].
 */
enum SpsStatus sps_sweep_to_json(const struct SpsSweep *sweep, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPS_LAB_H */
