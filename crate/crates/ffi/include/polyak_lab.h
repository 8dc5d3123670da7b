#ifndef POLYAK_LAB_H
#define POLYAK_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PolyakStatus {
  POLYAK_STATUS_OK = 0,
  POLYAK_STATUS_INVALID_ARGUMENT = 1,
  POLYAK_STATUS_DIMENSION_MISMATCH = 2,
  POLYAK_STATUS_ZERO_GRADIENT = 3,
  POLYAK_STATUS_INSUFFICIENT_METADATA = 4,
  POLYAK_STATUS_CONTRACT = 5,
  POLYAK_STATUS_UNSUPPORTED_SET = 6,
  POLYAK_STATUS_CONFIG = 7,
  POLYAK_STATUS_NUMERICAL_FAILURE = 8,
  POLYAK_STATUS_MALFORMED_TRAJECTORY = 9,
  POLYAK_STATUS_IO = 10,
  POLYAK_STATUS_JSON = 11,
  POLYAK_STATUS_NULL_POINTER = 12,
  POLYAK_STATUS_BUFFER_TOO_SMALL = 13,
  POLYAK_STATUS_UTF8 = 14,
  POLYAK_STATUS_PANIC = 15,
} PolyakStatus;

// How a single run ended.
typedef enum PolyakRunStatus {
  POLYAK_RUN_STATUS_COMPLETED = 0,
  POLYAK_RUN_STATUS_DIVERGED = 1,
  POLYAK_RUN_STATUS_RESAMPLE_EXHAUSTED = 2,
} PolyakRunStatus;

// Which per-step column [`polyak_trajectory_column`] copies.
typedef enum PolyakColumn {
  // `len + 1` iterates, row-major with `dim` values each.
  POLYAK_COLUMN_ITERATES = 0,
  POLYAK_COLUMN_GAMMAS = 1,
  POLYAK_COLUMN_FVALS = 2,
  POLYAK_COLUMN_GRADSQS = 3,
  POLYAK_COLUMN_LOWERS = 4,
  POLYAK_COLUMN_AVG_FVALS = 5,
  // `len + 1` values of ‖x_k‖.
  POLYAK_COLUMN_XNORMS = 6,
} PolyakColumn;

// Validated experiment config.
typedef struct PolyakExperiment PolyakExperiment;

// Result of running every seed of an experiment and its checks.
typedef struct PolyakOutcome PolyakOutcome;

// Closed convex set with an exact projector.
typedef struct PolyakSet PolyakSet;

// One recorded run.
typedef struct PolyakTrajectory PolyakTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message of the last failed call on this thread (empty after a
// success). Always NUL-terminated when `cap > 0`, truncating if needed;
// returns the untruncated length including the NUL.
//
// # Safety
// `out` must point to `cap` writable bytes or be null with `cap == 0`.
size_t polyak_last_error(char *out, size_t cap);

// Static NUL-terminated crate version.
const char *polyak_version(void);

// Parses and validates a TOML experiment config.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum PolyakStatus polyak_experiment_from_toml(const char *toml, struct PolyakExperiment **out);

// Overrides the base seed and the iteration budget (0 keeps the config value).
//
// # Safety
// `exp` must be a live handle.
enum PolyakStatus polyak_experiment_override(struct PolyakExperiment *exp,
                                             uint64_t seed,
                                             size_t iterations);

// Runs all seeds and checks of the experiment.
//
// # Safety
// `exp` must be a live handle; `out` must be writable.
enum PolyakStatus polyak_experiment_run(const struct PolyakExperiment *exp,
                                        struct PolyakOutcome **out);

// Runs the experiment's problem, rule and sampler once for `seed`, keeping
// the whole trajectory.
//
// # Safety
// `exp` must be a live handle; `out` must be writable.
enum PolyakStatus polyak_experiment_trajectory(const struct PolyakExperiment *exp,
                                               uint64_t seed,
                                               struct PolyakTrajectory **out);

// # Safety
// `exp` must come from this library and not be used afterwards.
void polyak_experiment_free(struct PolyakExperiment *exp);

// Whether every check met its expectation.
//
// # Safety
// `outcome` must be a live handle; `ok` must be writable.
enum PolyakStatus polyak_outcome_ok(const struct PolyakOutcome *outcome, bool *ok);

// PASS/FAIL lines, one per check, newline separated.
//
// # Safety
// `outcome` must be a live handle; `out` must hold `cap` bytes.
enum PolyakStatus polyak_outcome_lines(const struct PolyakOutcome *outcome,
                                       char *out,
                                       size_t cap,
                                       size_t *needed);

// JSON summary of the outcome.
//
// # Safety
// `outcome` must be a live handle; `out` must hold `cap` bytes.
enum PolyakStatus polyak_outcome_json(const struct PolyakOutcome *outcome,
                                      char *out,
                                      size_t cap,
                                      size_t *needed);

// # Safety
// `outcome` must come from this library and not be used afterwards.
void polyak_outcome_free(struct PolyakOutcome *outcome);

// Number of steps taken and iterate dimension.
//
// # Safety
// `traj` must be a live handle; `len` and `dim` must be writable.
enum PolyakStatus polyak_trajectory_shape(const struct PolyakTrajectory *traj,
                                          size_t *len,
                                          size_t *dim);

// Final status and the iteration it refers to (the run length when completed).
//
// # Safety
// `traj` must be a live handle; `status` and `k` must be writable.
enum PolyakStatus polyak_trajectory_status(const struct PolyakTrajectory *traj,
                                           enum PolyakRunStatus *status,
                                           size_t *k);

// # Safety
// `traj` must be a live handle; `out` must hold `cap` doubles.
enum PolyakStatus polyak_trajectory_column(const struct PolyakTrajectory *traj,
                                           enum PolyakColumn column,
                                           double *out,
                                           size_t cap,
                                           size_t *needed);

// Trajectory as CSV text (every step, iterate columns when `iterates`).
//
// # Safety
// `traj` must be a live handle; `out` must hold `cap` bytes.
enum PolyakStatus polyak_trajectory_csv(const struct PolyakTrajectory *traj,
                                        bool iterates,
                                        char *out,
                                        size_t cap,
                                        size_t *needed);

// # Safety
// `traj` must come from this library and not be used afterwards.
void polyak_trajectory_free(struct PolyakTrajectory *traj);

// Builds a set from its JSON description, e.g.
// `{"kind":"ball","center":[0,0],"radius":1}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum PolyakStatus polyak_set_from_json(const char *json, struct PolyakSet **out);

// # Safety
// `set` must be a live handle; `dim` must be writable.
enum PolyakStatus polyak_set_dim(const struct PolyakSet *set, size_t *dim);

// Euclidean projection of `x` (length `n`) into `out` (length `n`).
//
// # Safety
// `set` must be a live handle; `x` and `out` must hold `n` doubles.
enum PolyakStatus polyak_set_project(const struct PolyakSet *set,
                                     const double *x,
                                     size_t n,
                                     double *out);

// `(1 - t) x + t P(x)` with `t = λ_k min{1/2, γ_{-1}/λ_0}`.
//
// # Safety
// `set` must be a live handle; `x` and `out` must hold `n` doubles.
enum PolyakStatus polyak_set_relaxed_step(const struct PolyakSet *set,
                                          const double *x,
                                          size_t n,
                                          double lambda_k,
                                          double lambda_0,
                                          double gamma_init,
                                          double *out);

// # Safety
// `set` must come from this library and not be used afterwards.
void polyak_set_free(struct PolyakSet *set);

// `λ min{(f - ℓ)/‖g‖², γ_{-1}/λ}`.
//
// # Safety
// `out` must be writable.
enum PolyakStatus polyak_sps(double fval,
                             double lower,
                             double gradsq,
                             double lambda,
                             double gamma_init,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYAK_LAB_H */
