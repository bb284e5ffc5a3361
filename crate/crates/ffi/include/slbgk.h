#ifndef SLBGK_H
#define SLBGK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlbgkStatus {
  SLBGK_STATUS_OK = 0,
  SLBGK_STATUS_NULL_POINTER = 1,
  SLBGK_STATUS_INVALID_CONFIG = 2,
  SLBGK_STATUS_INVALID_ARGUMENT = 3,
  SLBGK_STATUS_SOLVER_FAILURE = 4,
  SLBGK_STATUS_BUFFER_TOO_SMALL = 5,
  SLBGK_STATUS_PANIC = 6,
} SlbgkStatus;

// Opaque simulation handle.
typedef struct SlbgkSimulation SlbgkSimulation;

// One-dimensional Euler state.
typedef struct SlbgkEulerState {
  double rho;
  double u;
  double p;
} SlbgkEulerState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a
// NUL-terminated string and returns the length needed including the NUL.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t slbgk_last_error_message(char *buf, size_t len);

// Number of runs a configuration expands into (1 unless it names a preset
// with several variants).
//
// # Safety
// `config_toml` must be a valid NUL-terminated string and `out` valid for a write.
enum SlbgkStatus slbgk_config_run_count(const char *config_toml, size_t *out);

// Creates a simulation from TOML configuration text. `run` selects one of
// the runs the configuration expands into.
//
// # Safety
// `config_toml` must be a valid NUL-terminated string and `out` valid for a write.
enum SlbgkStatus slbgk_simulation_new(const char *config_toml,
                                      size_t run,
                                      struct SlbgkSimulation **out);

// Releases a simulation. Null is ignored.
//
// # Safety
// `sim` must be null or a handle from [`slbgk_simulation_new`] not yet freed.
void slbgk_simulation_free(struct SlbgkSimulation *sim);

// Advances by up to `steps` steps, stopping early at the final time.
//
// # Safety
// `sim` must be a live handle.
enum SlbgkStatus slbgk_simulation_step(struct SlbgkSimulation *sim, size_t steps);

// Advances to the final time.
//
// # Safety
// `sim` must be a live handle.
enum SlbgkStatus slbgk_simulation_run(struct SlbgkSimulation *sim);

// # Safety
// `sim` must be a live handle and `out` valid for a write.
enum SlbgkStatus slbgk_simulation_time(struct SlbgkSimulation *sim, double *out);

// # Safety
// `sim` must be a live handle and `out` valid for a write.
enum SlbgkStatus slbgk_simulation_is_finished(struct SlbgkSimulation *sim, bool *out);

// Number of spatial grid points.
//
// # Safety
// `sim` must be a live handle and `out` valid for a write.
enum SlbgkStatus slbgk_simulation_num_points(struct SlbgkSimulation *sim, size_t *out);

// Copies the current profiles into caller buffers of length `len`. Any
// buffer may be null to skip that field.
//
// # Safety
// `sim` must be a live handle; non-null buffers must be valid for `len` writes.
enum SlbgkStatus slbgk_simulation_profiles(struct SlbgkSimulation *sim,
                                           double *x,
                                           double *rho,
                                           double *ux,
                                           double *temperature,
                                           double *pressure,
                                           size_t len);

// Samples the exact Euler Riemann solution with diaphragm `x0` at time `t`
// on `n` points.
//
// # Safety
// `xs` must be valid for `n` reads and `out` for `n` writes.
enum SlbgkStatus slbgk_riemann_sample(struct SlbgkEulerState left,
                                      struct SlbgkEulerState right,
                                      double gamma,
                                      double x0,
                                      double t,
                                      const double *xs,
                                      size_t n,
                                      struct SlbgkEulerState *out);

// Solves for the discrete Maxwellian whose grid moments equal
// `moments = (rho, rho Ux, rho Uy, rho Uz, E)` on the velocity grid with
// `n_v` intervals on `[-v_max, v_max]`. Writes the five exponent
// parameters of `exp(a0 + a1 vx + a2 vy + a3 vz + a4 |v|^2)` to `alpha`.
//
// # Safety
// `moments` must be valid for 5 reads, `alpha` for 5 writes, `iterations`
// null or valid for a write.
enum SlbgkStatus slbgk_discrete_maxwellian_solve(const double *moments,
                                                 double v_max,
                                                 size_t n_v,
                                                 double gas_constant,
                                                 double *alpha,
                                                 size_t *iterations);

// Library version as a static NUL-terminated string.
const char *slbgk_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLBGK_H */
