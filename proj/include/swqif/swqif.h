/* C interface to the swqif library. All handles are opaque; every call
   returns a status code and, on failure, leaves a message retrievable with
   swqif_last_error() on the calling thread. Strings returned through char**
   are owned by the caller and released with swqif_string_free(). */
#ifndef SWQIF_H
#define SWQIF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SWQIF_API __declspec(dllexport)
#else
#define SWQIF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum swqif_status {
  SWQIF_OK = 0,
  SWQIF_INVALID_ARGUMENT = 1,
  SWQIF_PARSE_ERROR,
  SWQIF_SCHEMA_ERROR,
  SWQIF_INCONSISTENT_SEQUENCE,
  SWQIF_PERIOD_OUT_OF_RANGE,
  SWQIF_EMPTY_CLUSTER,
  SWQIF_TOO_MANY_FOLDS,
  SWQIF_EMPTY_TRAINING,
  SWQIF_UNKNOWN_CLUSTER,
  SWQIF_DIMENSION_MISMATCH,
  SWQIF_SINGULAR_DESIGN,
  SWQIF_SINGULAR_C,
  SWQIF_NON_CONVERGENCE,
  SWQIF_INSUFFICIENT_DF,
  SWQIF_CONFIG_ERROR,
  SWQIF_IO_ERROR,
  SWQIF_VALIDATION_FAILED,
  SWQIF_INTERNAL_ERROR
} swqif_status;

typedef struct swqif_dataset swqif_dataset;
typedef struct swqif_report swqif_report;

SWQIF_API const char* swqif_version(void);
SWQIF_API const char* swqif_last_error(void);
SWQIF_API const char* swqif_status_name(swqif_status status);
/* 1 for configuration/input problems, 0 for estimation failures. */
SWQIF_API int swqif_status_is_config(swqif_status status);
SWQIF_API void swqif_string_free(char* s);

/* schema_json may be NULL for the default column names. */
SWQIF_API swqif_status swqif_dataset_read_csv(const char* path, const char* schema_json, swqif_dataset** out);
/* scenario_json: a preset name as a JSON string ("\"cluster-constant-20\"") or an object. */
SWQIF_API swqif_status swqif_dataset_generate(const char* scenario_json, uint64_t replicate, swqif_dataset** out);
SWQIF_API swqif_status swqif_dataset_write_csv(const swqif_dataset* dataset, const char* path);
SWQIF_API swqif_status swqif_dataset_clusters(const swqif_dataset* dataset, int* out);
SWQIF_API swqif_status swqif_dataset_periods(const swqif_dataset* dataset, int* out);
/* Replaces the randomization probabilities (length J+1, never-treated last). */
SWQIF_API swqif_status swqif_dataset_set_sequence_probs(swqif_dataset* dataset, const double* probs, size_t n);
SWQIF_API void swqif_dataset_free(swqif_dataset* dataset);

SWQIF_API swqif_status swqif_analyze(const swqif_dataset* dataset, const char* arm_json, swqif_report** out);
SWQIF_API swqif_status swqif_report_num_params(const swqif_report* report, int* out);
/* Copies p values into the caller's buffer of length n (n >= p). */
SWQIF_API swqif_status swqif_report_beta(const swqif_report* report, double* out, size_t n);
SWQIF_API swqif_status swqif_report_std_errors(const swqif_report* report, double* out, size_t n);
SWQIF_API swqif_status swqif_report_ci(const swqif_report* report, double* lower, double* upper, size_t n);
/* p*p row-major */
SWQIF_API swqif_status swqif_report_covariance(const swqif_report* report, double* out, size_t n);
SWQIF_API swqif_status swqif_report_df(const swqif_report* report, int* out);
SWQIF_API swqif_status swqif_report_to_json(const swqif_report* report, char** out);
SWQIF_API swqif_status swqif_report_to_csv(const swqif_report* report, char** out);
SWQIF_API void swqif_report_free(swqif_report* report);

/* Runs a Monte Carlo experiment. out_dir, reps > 0 and threads > 0 override
   the config; pass NULL / 0 to keep its values. summary_csv may be NULL. */
SWQIF_API swqif_status swqif_simulate(const char* config_json, const char* out_dir, int reps, int threads,
                                      char** summary_csv);

/* Runs the built-in self-checks; SWQIF_VALIDATION_FAILED if any fails. */
SWQIF_API swqif_status swqif_validate(int verbose, char** text);

#ifdef __cplusplus
}
#endif

#endif
