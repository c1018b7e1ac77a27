#ifndef CLIMATE_STRESS_H
#define CLIMATE_STRESS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Positive values match the CLI exit codes.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_INGEST = 2,
  CS_STATUS_CALIBRATION = 3,
  CS_STATUS_SOLVER = 4,
  CS_STATUS_NUMERIC = 5,
  CS_STATUS_USAGE = 64,
  /**
   * A required pointer argument was null.
   */
  CS_STATUS_NULL_ARGUMENT = -1,
  /**
   * The requested year or index is not on the run's grid.
   */
  CS_STATUS_NOT_FOUND = -2,
  /**
   * The output buffer is too small; the required length was written.
   */
  CS_STATUS_BUFFER_TOO_SMALL = -3,
  /**
   * A Rust panic was caught at the boundary.
   */
  CS_STATUS_INTERNAL = -99,
} CsStatus;

/**
 * Portfolio kind in `CsStressResult`.
 */
typedef enum CsPortfolioKind {
  CS_PORTFOLIO_KIND_ANNUITY = 0,
  CS_PORTFOLIO_KIND_INSURANCE = 1,
} CsPortfolioKind;

/**
 * Opaque solved run.
 */
typedef struct CsRun CsRun;

/**
 * One portfolio's stress-test outcome. Deviations are in percent.
 */
typedef struct CsStressResult {
  enum CsPortfolioKind kind;
  int32_t year;
  double temperature;
  double rel_mean;
  double rel_q01;
  double rel_q99;
  double rel_mean_se;
  double analytic_rel_mean;
} CsStressResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cs_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *cs_last_error_message(void);

/**
 * Solves the model on the DICE-2016 exogenous paths. `schedule` is
 * `"optimal"`, `"netzero@YEAR"` or `"zeroind@YEAR"`; null means optimal.
 *
 * # Safety
 * `schedule` must be null or a valid C string; `out` must be writable.
 */
enum CsStatus cs_run_original_dice(const char *schedule, struct CsRun **out);

/**
 * Solves the scenario described by a TOML run configuration. Relative
 * paths inside it resolve against the process working directory.
 *
 * # Safety
 * `config_toml` must be a valid C string; `out` must be writable.
 */
enum CsStatus cs_run_from_toml(const char *config_toml, struct CsRun **out);

/**
 * Loads a run previously written with `cs_run_write_artifacts` or the CLI.
 *
 * # Safety
 * `dir` must be a valid C string; `out` must be writable.
 */
enum CsStatus cs_run_load(const char *dir, struct CsRun **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `run` must come from this library and must not be used afterwards.
 */
void cs_run_free(struct CsRun *run);

/**
 * Writes trajectories.csv, run.json, diagnostics.json and metadata.json.
 *
 * # Safety
 * `run` must be a live handle and `dir` a valid C string.
 */
enum CsStatus cs_run_write_artifacts(const struct CsRun *run, const char *dir);

/**
 * Number of grid periods in the run, 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t cs_run_periods(const struct CsRun *run);

/**
 * Copies the grid years into `years` (capacity `len`).
 *
 * # Safety
 * `years` must hold `len` writable elements.
 */
enum CsStatus cs_run_years(const struct CsRun *run, int32_t *years, size_t len);

/**
 * Atmospheric temperature anomaly at a grid year, degrees C.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CsStatus cs_run_temperature(const struct CsRun *run, int32_t year, double *out);

/**
 * Social cost of carbon at a grid year, USD per tCO2.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CsStatus cs_run_scc(const struct CsRun *run, int32_t year, double *out);

/**
 * Climate-induced excess mortality at a grid year, as a fraction.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CsStatus cs_run_excess_mortality(const struct CsRun *run, int32_t year, double *out);

/**
 * First grid year in which the emission control reaches 1.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CsStatus cs_run_first_full_abatement_year(const struct CsRun *run, int32_t *out);

/**
 * Stress-tests the default portfolios against the run. Writes up to
 * `capacity` results and the number produced into `written`.
 *
 * # Safety
 * `results` must hold `capacity` writable elements; `written` writable.
 */
enum CsStatus cs_stress_default_portfolios(const struct CsRun *run,
                                           int32_t year,
                                           size_t n_sims,
                                           uint64_t seed,
                                           struct CsStressResult *results,
                                           size_t capacity,
                                           size_t *written);

/**
 * Relative change of human capital, in percent, for the default income
 * profile at discount `rate` with mortality stressed through `end_year`.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CsStatus cs_human_capital_relative(const struct CsRun *run,
                                        double rate,
                                        int32_t end_year,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLIMATE_STRESS_H */
