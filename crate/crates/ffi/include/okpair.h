#ifndef OKPAIR_H
#define OKPAIR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum OkpairStatus {
  OKPAIR_STATUS_OK = 0,
  OKPAIR_STATUS_NULL_POINTER = 1,
  OKPAIR_STATUS_INVALID_UTF8 = 2,
  OKPAIR_STATUS_PARSE = 3,
  OKPAIR_STATUS_NOT_FOUND = 4,
  OKPAIR_STATUS_INVALID_ARGUMENT = 5,
  OKPAIR_STATUS_INTEGRATION = 6,
  OKPAIR_STATUS_OUT_OF_RANGE = 7,
  OKPAIR_STATUS_PANIC = 8,
} OkpairStatus;

/**
 * Opaque atlas handle.
 */
typedef struct OkpairAtlas OkpairAtlas;

/**
 * Opaque trajectory handle.
 */
typedef struct OkpairTrajectory OkpairTrajectory;

/**
 * One trajectory sample; `chart` indexes the atlas charts in declaration order.
 */
typedef struct OkpairSample {
  double t_re;
  double t_im;
  double x_re;
  double x_im;
  double y_re;
  double y_im;
  double h;
  double err;
  uint32_t chart;
} OkpairSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next okpair call on the same thread.
 */
const char *okpair_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *okpair_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from an okpair `char**` out-parameter and not be freed twice.
 */
void okpair_string_free(char *s);

/**
 * Loads a built-in atlas (`"E7"` or `"D8"`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OkpairStatus okpair_atlas_builtin(const char *name, struct OkpairAtlas **out);

/**
 * Parses an atlas from DSL text.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OkpairStatus okpair_atlas_from_dsl(const char *source, struct OkpairAtlas **out);

/**
 * # Safety
 * `atlas` must come from an okpair constructor and not be freed twice. Null is ignored.
 */
void okpair_atlas_free(struct OkpairAtlas *atlas);

/**
 * Number of charts of an atlas, or 0 for null.
 *
 * # Safety
 * `atlas` must be null or a live handle.
 */
uintptr_t okpair_atlas_chart_count(const struct OkpairAtlas *atlas);

/**
 * Serializes an atlas back to DSL text.
 *
 * # Safety
 * `atlas` must be a live handle and `out` a valid pointer.
 */
enum OkpairStatus okpair_atlas_to_dsl(const struct OkpairAtlas *atlas, char **out);

/**
 * Runs the full symbolic verification pipeline. `passed` receives 1 or 0.
 * When `report_json` is non-null it receives the per-check report.
 *
 * # Safety
 * `atlas` must be a live handle; `passed` a valid pointer; `report_json` null or valid.
 */
enum OkpairStatus okpair_verify(const struct OkpairAtlas *atlas,
                                int32_t *passed,
                                char **report_json);

/**
 * Integrates along the polyline `waypoints` (`2 * n_waypoints` doubles, re/im
 * interleaved) from `(x, y)` in chart `chart`. Parameters are given as
 * `n_params` names with `2 * n_params` interleaved values. A single waypoint
 * yields the one-sample trajectory.
 *
 * # Safety
 * All pointers must be valid for the stated lengths; `out` must be valid.
 */
enum OkpairStatus okpair_integrate(const struct OkpairAtlas *atlas,
                                   const char *chart,
                                   double x_re,
                                   double x_im,
                                   double y_re,
                                   double y_im,
                                   const double *waypoints,
                                   uintptr_t n_waypoints,
                                   const char *const *param_names,
                                   const double *param_values,
                                   uintptr_t n_params,
                                   double rtol,
                                   double atol,
                                   struct OkpairTrajectory **out);

/**
 * # Safety
 * `traj` must come from [`okpair_integrate`] and not be freed twice. Null is ignored.
 */
void okpair_trajectory_free(struct OkpairTrajectory *traj);

/**
 * Number of samples, or 0 for null.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
uintptr_t okpair_trajectory_len(const struct OkpairTrajectory *traj);

/**
 * Number of chart switches, or 0 for null.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
uintptr_t okpair_trajectory_switch_count(const struct OkpairTrajectory *traj);

/**
 * Copies sample `index` into `out`.
 *
 * # Safety
 * `traj` must be a live handle and `out` a valid pointer.
 */
enum OkpairStatus okpair_trajectory_sample(const struct OkpairTrajectory *traj,
                                           uintptr_t index,
                                           struct OkpairSample *out);

/**
 * Serializes a trajectory as JSON.
 *
 * # Safety
 * `traj` must be a live handle and `out` a valid pointer.
 */
enum OkpairStatus okpair_trajectory_to_json(const struct OkpairTrajectory *traj, char **out);

/**
 * Classifies an intersection matrix given as JSON (`{"n":..,"entries":..}` or
 * an array of rows). Returns [`OkpairStatus::NotFound`] outside the catalog.
 *
 * # Safety
 * `matrix_json` must be a NUL-terminated string and `out_json` a valid pointer.
 */
enum OkpairStatus okpair_classify(const char *matrix_json, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OKPAIR_H */
