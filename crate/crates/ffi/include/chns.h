/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef CHNS_H
#define CHNS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which field [`chns_simulation_copy_field`] reads.
 */
typedef enum {
  CHNS_FIELD_PHI = 0,
  CHNS_FIELD_MU = 1,
  CHNS_FIELD_Q = 2,
  CHNS_FIELD_PRESSURE = 3,
  /**
   * x-components on the stored x-faces.
   */
  CHNS_FIELD_VELOCITY_X = 4,
  /**
   * y-components on the stored y-faces.
   */
  CHNS_FIELD_VELOCITY_Y = 5,
} ChnsField;

/**
 * Result codes. The first four agree with the exit codes of the `chns` CLI.
 */
typedef enum {
  CHNS_STATUS_OK = 0,
  /**
   * Invalid config, parameter or argument.
   */
  CHNS_STATUS_INVALID = 1,
  /**
   * The nonlinear or linear solver failed; the simulation keeps its last good state.
   */
  CHNS_STATUS_SOLVER_FAILED = 2,
  /**
   * An audit or selftest check failed.
   */
  CHNS_STATUS_CHECK_FAILED = 3,
  CHNS_STATUS_NULL_POINTER = 4,
  /**
   * The caller's buffer is shorter than required.
   */
  CHNS_STATUS_BUFFER_TOO_SMALL = 5,
  CHNS_STATUS_IO = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  CHNS_STATUS_PANIC = 7,
} ChnsStatus;

/**
 * Opaque simulation handle.
 */
typedef struct ChnsSimulation ChnsSimulation;

/**
 * One row of the energy ledger.
 */
typedef struct {
  uint64_t step;
  double t;
  double tau;
  double e_kin;
  double e_grad;
  double e_surf;
  double e_bulk;
  double e_tot;
  double visc;
  double q_diss;
  double mu_diss;
  double kin_jump;
  double grad_jump;
  double phi_jump;
  double biharm;
  double slack;
  double phi_mass;
  double surf_total;
  double div_inf;
  uint64_t picard_iters;
  /**
   * 1 when the slack is below the tolerance.
   */
  int32_t flagged;
} ChnsLedgerRow;

/**
 * Conserved quantities and diagnostics of the current state.
 */
typedef struct {
  double phi_mass;
  double surf_total;
  double kinetic;
  double div_inf;
  double phi_min;
  double phi_max;
  double q_min;
  double q_max;
} ChnsObservables;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * NUL-terminated version string of the library. Static; do not free.
 */
const char *chns_version(void);

/**
 * Message of the last failing call on this thread, or NULL. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *chns_last_error(void);

/**
 * Creates a simulation from INI text. Unknown keys are an error.
 *
 * # Safety
 * `ini` must be a NUL-terminated string and `out` a valid pointer.
 */
ChnsStatus chns_simulation_new(const char *ini, ChnsSimulation **out);

/**
 * Creates a simulation from a config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
ChnsStatus chns_simulation_from_file(const char *path, ChnsSimulation **out);

/**
 * Releases a simulation. NULL is ignored.
 *
 * # Safety
 * `sim` must come from a constructor of this library and not be used afterwards.
 */
void chns_simulation_free(ChnsSimulation *sim);

/**
 * Advances by up to `steps` time steps of the configured size, stopping early
 * at the configured horizon. `taken` (optional) receives the number of
 * accepted steps. On solver failure the accepted steps are kept.
 *
 * # Safety
 * `sim` must be a live handle; `taken` may be NULL.
 */
ChnsStatus chns_simulation_advance(ChnsSimulation *sim, uint64_t steps, uint64_t *taken);

/**
 * Current time, step count and grid shape. Any output pointer may be NULL.
 *
 * # Safety
 * `sim` must be a live handle; non-null outputs must be valid.
 */
ChnsStatus chns_simulation_info(const ChnsSimulation *sim,
                                double *t,
                                uint64_t *step,
                                uint64_t *nx,
                                uint64_t *ny);

/**
 * Number of values of `field`.
 *
 * # Safety
 * `sim` must be a live handle and `len` valid.
 */
ChnsStatus chns_simulation_field_len(const ChnsSimulation *sim, ChnsField field, uint64_t *len);

/**
 * Copies `field` into `buf` (row-major, x fastest).
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` doubles.
 */
ChnsStatus chns_simulation_copy_field(const ChnsSimulation *sim,
                                      ChnsField field,
                                      double *buf,
                                      uint64_t len);

/**
 * Number of ledger rows recorded so far.
 *
 * # Safety
 * `sim` must be a live handle and `len` valid.
 */
ChnsStatus chns_simulation_ledger_len(const ChnsSimulation *sim, uint64_t *len);

/**
 * Reads ledger row `index` (0-based).
 *
 * # Safety
 * `sim` must be a live handle and `row` valid.
 */
ChnsStatus chns_simulation_ledger_row(const ChnsSimulation *sim,
                                      uint64_t index,
                                      ChnsLedgerRow *row);

/**
 * Observables of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid.
 */
ChnsStatus chns_simulation_observables(const ChnsSimulation *sim, ChnsObservables *out);

/**
 * Runs the constitutive assumption audit of the simulation's parameters.
 * Returns [`ChnsStatus::CheckFailed`] when any clause fails; `failed`
 * (optional) receives the number of failing clauses.
 *
 * # Safety
 * `sim` must be a live handle; `failed` may be NULL.
 */
ChnsStatus chns_simulation_audit(const ChnsSimulation *sim, uint64_t *failed);

/**
 * Runs the built-in selftest. `passed`/`failed` (optional) receive the counts.
 *
 * # Safety
 * Non-null outputs must be valid.
 */
ChnsStatus chns_selftest(uint64_t *passed, uint64_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHNS_H */
