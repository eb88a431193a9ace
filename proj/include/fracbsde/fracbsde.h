#pragma once

/* C interface of the fracbsde library.
 *
 * Every function returning int returns an fbsde_status. On failure the
 * message is available from fbsde_last_error() until the next call on the
 * same thread. Strings returned by the library are owned by it. */

#include <stddef.h>
#include <stdint.h>

#if defined(FBSDE_BUILDING_LIBRARY)
#define FBSDE_API __attribute__((visibility("default")))
#else
#define FBSDE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fbsde_status {
    FBSDE_OK = 0,
    FBSDE_INTERNAL = 1,
    FBSDE_VALIDATION = 2,
    FBSDE_NUMERICAL = 3,
    FBSDE_ACCEPTANCE = 4
} fbsde_status;

typedef struct fbsde_experiment fbsde_experiment;
typedef struct fbsde_paths fbsde_paths;

FBSDE_API const char* fbsde_version(void);

/// Message of the last failed call on this thread, "" if none.
FBSDE_API const char* fbsde_last_error(void);

/// Short error code name ("domain", "infeasible", ...) of the last failure.
FBSDE_API const char* fbsde_last_error_code(void);

/// phi(x) = H(2H-1)|x|^(2H-2), x != 0.
FBSDE_API int fbsde_phi(double H, double x, double* out);

/// <f, g>_t for piecewise-constant f, g given by n cell values of width dt.
FBSDE_API int fbsde_inner_product(double H, const double* f_cells, const double* g_cells, size_t n,
                                  double dt, double t, double* out);

/// beta and delta_max = 1/beta for mode "existence" or "comparison".
FBSDE_API int fbsde_admissible_delay(double L, double M, const char* mode, double* beta,
                                     double* delta_max);

/// Largest admissible horizon in (0, 1000]; v <= 0 selects 1/(8 L M e^beta).
/// L = 0 yields the cap 1000.
FBSDE_API int fbsde_admissible_horizon(double L, double M, double H, double beta, double v,
                                       double* horizon);

FBSDE_API size_t fbsde_scenario_count(void);
/// NULL when index is out of range.
FBSDE_API const char* fbsde_scenario_name(size_t index);
FBSDE_API const char* fbsde_scenario_description(size_t index);
/// Resolved config of the scenario as JSON text.
FBSDE_API const char* fbsde_scenario_config(size_t index);

/// Holds a config text; parsing happens in fbsde_experiment_run so that
/// config errors land in the report. Returns NULL only on allocation failure.
FBSDE_API fbsde_experiment* fbsde_experiment_create(const char* config_json);
/// Like fbsde_experiment_create; the file is read by fbsde_experiment_run and
/// an unreadable file is reported there as a validation (io) error.
FBSDE_API fbsde_experiment* fbsde_experiment_create_from_file(const char* path);
FBSDE_API void fbsde_experiment_destroy(fbsde_experiment* exp);
FBSDE_API int fbsde_experiment_set_seed(fbsde_experiment* exp, uint64_t seed);
FBSDE_API int fbsde_experiment_set_output_dir(fbsde_experiment* exp, const char* dir);
/// 0 keeps everything in memory (no files written).
FBSDE_API int fbsde_experiment_set_write_files(fbsde_experiment* exp, int enabled);
/// Runs the pipeline; returns the run status (also the CLI exit code).
FBSDE_API int fbsde_experiment_run(fbsde_experiment* exp);
/// report.json text of the last run, "" before the first run.
FBSDE_API const char* fbsde_experiment_report(const fbsde_experiment* exp);
/// Output directory used by the last run.
FBSDE_API const char* fbsde_experiment_output_dir(const fbsde_experiment* exp);

/// Samples B^H on a uniform grid of n_steps cells over [0, horizon].
/// method is "cholesky" or "hosking".
FBSDE_API int fbsde_paths_sample(double H, double horizon, int n_steps, int64_t n_paths,
                                 uint64_t seed, const char* method, fbsde_paths** out);
FBSDE_API void fbsde_paths_destroy(fbsde_paths* paths);
FBSDE_API int fbsde_paths_dims(const fbsde_paths* paths, int64_t* n_paths, int64_t* n_nodes);
/// Copies path p (n_nodes values starting with 0) into out.
FBSDE_API int fbsde_paths_row(const fbsde_paths* paths, int64_t p, double* out);

#ifdef __cplusplus
}
#endif
