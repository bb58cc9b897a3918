/* C interface to the odiwi library.
 *
 * Every fallible call returns an odiwi_status. On failure the message of the
 * most recent error on the calling thread is available from
 * odiwi_last_error_message() until the next failing call on that thread.
 * Strings returned through char** out-parameters are owned by the caller and
 * released with odiwi_string_free(). Numeric matrices are row-major.
 * Configuration is passed as flat JSON objects; unknown keys are rejected.
 */
#ifndef ODIWI_ODIWI_H
#define ODIWI_ODIWI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ODIWI_BUILDING_LIBRARY)
#    define ODIWI_API __declspec(dllexport)
#  else
#    define ODIWI_API __declspec(dllimport)
#  endif
#else
#  define ODIWI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum odiwi_status {
  ODIWI_OK = 0,
  ODIWI_INVALID_ARGUMENT,
  ODIWI_DIMENSION_MISMATCH,
  ODIWI_SCHEMA_ERROR,
  ODIWI_MISSING_VALUE,
  ODIWI_IO_ERROR,
  ODIWI_RANK_DEFICIENT,
  ODIWI_SEPARATION,
  ODIWI_NO_CONVERGENCE,
  ODIWI_EMPTY_DESIGN,
  ODIWI_DEGENERATE_RANGE,
  ODIWI_SINGULAR_INFORMATION,
  ODIWI_EMPTY_AFTER_PRUNE,
  ODIWI_DEGENERATE_SAMPLE,
  ODIWI_ALL_ZERO_WEIGHTS,
  ODIWI_TOO_MANY_FAILURES,
  ODIWI_INTERNAL_ERROR
} odiwi_status;

/* Categories double as process exit codes for command-line front ends. */
typedef enum odiwi_category {
  ODIWI_CATEGORY_NONE = 0,
  ODIWI_CATEGORY_INTERNAL = 1,
  ODIWI_CATEGORY_USAGE = 2,
  ODIWI_CATEGORY_DATA = 3,
  ODIWI_CATEGORY_NUMERICAL = 4
} odiwi_category;

typedef struct odiwi_first_stage odiwi_first_stage;
typedef struct odiwi_second_stage odiwi_second_stage;
typedef struct odiwi_result odiwi_result;
typedef struct odiwi_bootstrap odiwi_bootstrap;
typedef struct odiwi_design odiwi_design;
typedef struct odiwi_experiment odiwi_experiment;

ODIWI_API const char* odiwi_version(void);
ODIWI_API const char* odiwi_status_name(odiwi_status status);
ODIWI_API odiwi_category odiwi_status_category(odiwi_status status);
ODIWI_API const char* odiwi_last_error_message(void);
/* Data row (1-based) and column of the last error, when known; row is -1 otherwise. */
ODIWI_API long odiwi_last_error_row(void);
ODIWI_API const char* odiwi_last_error_column(void);
ODIWI_API void odiwi_string_free(char* s);

/* ---- datasets ---------------------------------------------------------- */

/* report_json may be NULL; otherwise receives {"source","rows","columns"}. */
ODIWI_API odiwi_status odiwi_first_stage_load(const char* path, odiwi_first_stage** out,
                                              char** report_json);
ODIWI_API odiwi_status odiwi_first_stage_create(const double* exposures, const double* covariates,
                                                size_t n, size_t p, size_t d,
                                                odiwi_first_stage** out);
ODIWI_API odiwi_status odiwi_first_stage_write(const odiwi_first_stage* data, const char* path);
ODIWI_API size_t odiwi_first_stage_rows(const odiwi_first_stage* data);
ODIWI_API size_t odiwi_first_stage_exposure_dim(const odiwi_first_stage* data);
/* Copies the n x p exposure matrix, row-major. */
ODIWI_API odiwi_status odiwi_first_stage_exposures(const odiwi_first_stage* data, double* out,
                                                   size_t len);
ODIWI_API void odiwi_first_stage_free(odiwi_first_stage* data);

/* family: "logit" or "gaussian". */
ODIWI_API odiwi_status odiwi_second_stage_load(const char* path, const char* family,
                                               odiwi_second_stage** out, char** report_json);
ODIWI_API odiwi_status odiwi_second_stage_create(const double* outcomes, const double* covariates,
                                                 const double* geo, size_t n, size_t q, size_t d,
                                                 odiwi_second_stage** out);
ODIWI_API odiwi_status odiwi_second_stage_write(const odiwi_second_stage* data, const char* path);
ODIWI_API size_t odiwi_second_stage_rows(const odiwi_second_stage* data);
ODIWI_API void odiwi_second_stage_free(odiwi_second_stage* data);

/* One replication of the simulation model (keys as for odiwi_simulate). */
ODIWI_API odiwi_status odiwi_generate(const char* config_json, uint64_t cell, uint64_t rep,
                                      odiwi_first_stage** first, odiwi_second_stage** second);

/* ---- estimation -------------------------------------------------------- */

ODIWI_API odiwi_status odiwi_estimate(const odiwi_first_stage* first,
                                      const odiwi_second_stage* second, const char* family,
                                      const char* config_json, odiwi_result** out);
ODIWI_API size_t odiwi_result_num_coefficients(const odiwi_result* result);
ODIWI_API odiwi_status odiwi_result_coefficients(const odiwi_result* result, double* out,
                                                 size_t len);
ODIWI_API odiwi_status odiwi_result_naive_coefficients(const odiwi_result* result, double* out,
                                                       size_t len);
ODIWI_API int odiwi_result_all_certified(const odiwi_result* result);
ODIWI_API odiwi_status odiwi_result_json(const odiwi_result* result, char** out);
ODIWI_API odiwi_status odiwi_result_trajectory_csv(const odiwi_result* result, char** out);
ODIWI_API void odiwi_result_free(odiwi_result* result);

/* config_json accepts the estimator keys plus "bootstrap" (replicates),
 * "level", "resample_first_stage", "bootstrap_seed" and "coefficient". */
ODIWI_API odiwi_status odiwi_bootstrap_run(const odiwi_first_stage* first,
                                           const odiwi_second_stage* second, const char* family,
                                           const char* config_json, odiwi_bootstrap** out);
ODIWI_API odiwi_status odiwi_bootstrap_interval(const odiwi_bootstrap* boot, double* point,
                                                double* lower, double* upper,
                                                double* standard_error);
ODIWI_API odiwi_status odiwi_bootstrap_json(const odiwi_bootstrap* boot, char** out);
ODIWI_API odiwi_status odiwi_bootstrap_replicates_csv(const odiwi_bootstrap* boot, char** out);
ODIWI_API odiwi_status odiwi_bootstrap_trajectory_csv(const odiwi_bootstrap* boot, char** out);
ODIWI_API void odiwi_bootstrap_free(odiwi_bootstrap* boot);

/* ---- designs ----------------------------------------------------------- */

/* Request keys: beta (array), family, range ([lo, hi]) or exposures (array of
 * points), resolution, criterion, tol, max_iter, merge_radius, min_weight,
 * exposure_degree. */
ODIWI_API odiwi_status odiwi_design_solve(const char* request_json, odiwi_design** out);
ODIWI_API odiwi_status odiwi_design_from_json(const char* design_json, odiwi_design** out);
ODIWI_API size_t odiwi_design_size(const odiwi_design* design);
ODIWI_API size_t odiwi_design_dim(const odiwi_design* design);
ODIWI_API odiwi_status odiwi_design_support(const odiwi_design* design, double* out, size_t len);
ODIWI_API odiwi_status odiwi_design_weights(const odiwi_design* design, double* out, size_t len);
ODIWI_API double odiwi_design_certificate(const odiwi_design* design);
ODIWI_API odiwi_status odiwi_design_json(const odiwi_design* design, char** out);
ODIWI_API void odiwi_design_free(odiwi_design* design);

/* Importance weights of the first-stage rows toward the design's kernel
 * mixture. Keys: kernel, bandwidth, bandwidth_fraction, clip_quantile,
 * floor_fraction. Output CSV: id, weight, raw_ratio. metadata_json may be NULL;
 * otherwise receives the resolved settings. */
ODIWI_API odiwi_status odiwi_importance_weights_csv(const odiwi_first_stage* first,
                                                    const odiwi_design* design,
                                                    const char* config_json, char** out,
                                                    char** metadata_json);

/* ---- simulation -------------------------------------------------------- */

/* Simulation keys (n_star, n, d, gamma, sigma_eps, snr, beta0, beta_x, reps,
 * seed, shift), "beta_x_grid" (array, default [beta_x]), "threads", and the
 * estimator keys. */
ODIWI_API odiwi_status odiwi_simulate(const char* config_json, odiwi_experiment** out);
ODIWI_API odiwi_status odiwi_experiment_metrics_csv(const odiwi_experiment* exp, char** out);
ODIWI_API odiwi_status odiwi_experiment_summary_csv(const odiwi_experiment* exp, char** out);
ODIWI_API odiwi_status odiwi_experiment_trace_csv(const odiwi_experiment* exp, char** out);
ODIWI_API odiwi_status odiwi_experiment_metadata_json(const odiwi_experiment* exp, char** out);
ODIWI_API void odiwi_experiment_free(odiwi_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif
