#ifndef SURFWAVE_H
#define SURFWAVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum SwStatus {
  SW_STATUS_OK = 0,
  SW_STATUS_NULL_POINTER = 1,
  SW_STATUS_INVALID_ARGUMENT = 2,
  SW_STATUS_INVALID_CONFIG = 3,
  SW_STATUS_NUMERICAL = 4,
  SW_STATUS_IO = 5,
  SW_STATUS_BUFFER_TOO_SMALL = 6,
  SW_STATUS_PANIC = 7,
} SwStatus;

// Operator `ψ ↦ G(η)ψ` on a fixed grid and depth.
typedef struct SwDtnSolver SwDtnSolver;

// A completed simulation with its manifest and time series.
typedef struct SwRun SwRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *sw_version(void);

// Copies the last error message of this thread into `buf`.
//
// # Safety
// `buf` must point to `capacity` writable bytes or be null; `needed` must be null or valid.
enum SwStatus sw_last_error(char *buf, size_t capacity, size_t *needed);

// Builds a solver on `n_x` points with `n_z` vertical intervals. `infinite != 0`
// selects infinite depth and ignores `depth`.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum SwStatus sw_dtn_solver_new(size_t n_x,
                                size_t n_z,
                                double depth,
                                int32_t infinite,
                                struct SwDtnSolver **out);

// Releases a solver; null is ignored.
//
// # Safety
// `solver` must come from [`sw_dtn_solver_new`] and not be used afterwards.
void sw_dtn_solver_free(struct SwDtnSolver *solver);

// Evaluates `G(η)ψ` at the grid nodes `x_j = 2πj/n`.
//
// # Safety
// `eta`, `psi` and `out` must each point to `n` doubles, `n` equal to the solver's `n_x`.
enum SwStatus sw_dtn_apply(const struct SwDtnSolver *solver,
                           const double *eta,
                           const double *psi,
                           size_t n,
                           double *out);

// Validates and runs a JSON configuration.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out` a valid handle slot.
enum SwStatus sw_run_from_json(const char *config_json, struct SwRun **out);

// Releases a run; null is ignored.
//
// # Safety
// `run` must come from [`sw_run_from_json`] and not be used afterwards.
void sw_run_free(struct SwRun *run);

// Writes 1 to `passed` when every asserted invariant held, else 0.
//
// # Safety
// `run` and `passed` must be valid.
enum SwStatus sw_run_passed(const struct SwRun *run, int32_t *passed);

// Number of recorded states.
//
// # Safety
// `run` and `len` must be valid.
enum SwStatus sw_run_len(const struct SwRun *run, size_t *len);

// Copies the JSON manifest.
//
// # Safety
// See [`sw_last_error`] for the buffer contract; `run` must be valid.
enum SwStatus sw_run_manifest_json(const struct SwRun *run,
                                   char *buf,
                                   size_t capacity,
                                   size_t *needed);

// Copies the time-series CSV.
//
// # Safety
// See [`sw_last_error`] for the buffer contract; `run` must be valid.
enum SwStatus sw_run_csv(const struct SwRun *run, char *buf, size_t capacity, size_t *needed);

// Writes the standing-wave period integrals for `eps[0..n]` into `kinetic` and
// `potential`; `coefficients` holds a13, a33, b13, b33 or is null for zeros.
//
// # Safety
// `eps`, `kinetic` and `potential` must point to `n` doubles; `coefficients` to 4 or null.
enum SwStatus sw_standing_wave_integrals(const double *eps,
                                         size_t n,
                                         const double *coefficients,
                                         double *kinetic,
                                         double *potential);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFWAVE_H */
