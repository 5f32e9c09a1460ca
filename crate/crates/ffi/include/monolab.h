#ifndef MONOLAB_H
#define MONOLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MlStatus {
  ML_STATUS_OK = 0,
  ML_STATUS_NULL_POINTER = 1,
  ML_STATUS_INVALID_ARGUMENT = 2,
  ML_STATUS_NUMERICAL = 3,
  ML_STATUS_IO = 4,
  ML_STATUS_PANIC = 5,
} MlStatus;

// Opaque differential-check report.
typedef struct MlReport MlReport;

// Opaque pure state.
typedef struct MlState MlState;

typedef struct MlInvariants {
  double i1;
  double i2;
  double i3;
  double i4;
  double i5;
  double tau_ab_c;
  double tau_ac_b;
  double tau_bc_a;
  double tau_abc;
  double phi;
  double sigma;
} MlInvariants;

typedef struct MlCounts {
  uint64_t pass;
  uint64_t violation;
  uint64_t ill_conditioned;
} MlCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into the library on this thread.
const char *ml_last_error(void);

// Library version as a static NUL-terminated string.
const char *ml_version(void);

// Builds a state from `n_amps` interleaved (re, im) pairs in row-major
// order. The amplitudes must already be normalized.
//
// # Safety
// `dims` must point to `n_dims` values, `amps` to `2 * n_amps` values.
enum MlStatus ml_state_new(const size_t *dims,
                           size_t n_dims,
                           const double *amps,
                           size_t n_amps,
                           struct MlState **out);

// Built-in state by name: product, bell, ghz, w.
//
// # Safety
// `name` must be a NUL-terminated string.
enum MlStatus ml_state_named(const char *name, struct MlState **out);

// # Safety
// `state` must come from this library and not be freed twice.
void ml_state_free(struct MlState *state);

// Total Hilbert-space dimension, 0 for NULL.
//
// # Safety
// `state` must be NULL or a live handle.
size_t ml_state_dim(const struct MlState *state);

// Three-qubit invariants; fails for any other shape.
//
// # Safety
// `state` must be a live handle, `out` writable.
enum MlStatus ml_invariants(const struct MlState *state, struct MlInvariants *out);

// Evaluates a catalog monotone on the state.
//
// # Safety
// `state` must be a live handle, `name` NUL-terminated, `out` writable.
enum MlStatus ml_monotone_eval(const struct MlState *state, const char *name, double *out);

// Differential check of one monotone (`name` or `name@decreasing`) with
// default tolerances.
//
// # Safety
// `monotone` must be NUL-terminated, `out` writable.
enum MlStatus ml_check_run(const char *monotone,
                           size_t n_states,
                           size_t n_directions,
                           uint64_t seed,
                           struct MlReport **out);

// # Safety
// `report` must be a live handle, `out` writable.
enum MlStatus ml_report_counts(const struct MlReport *report, struct MlCounts *out);

// Canonical JSON of the report; free with `ml_string_free`.
//
// # Safety
// `report` must be a live handle, `out` writable.
enum MlStatus ml_report_json(const struct MlReport *report, char **out);

// # Safety
// `report` must come from this library and not be freed twice.
void ml_report_free(struct MlReport *report);

// Runs a campaign from a JSON config and returns the report as canonical
// JSON; free with `ml_string_free`.
//
// # Safety
// `config_json` must be NUL-terminated, `out` writable.
enum MlStatus ml_campaign_run_json(const char *config_json, char **out);

// # Safety
// `s` must be NULL or a string returned by this library.
void ml_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MONOLAB_H */
