#ifndef DQM_DQM_H
#define DQM_DQM_H

#include <stddef.h>

#if defined(DQM_BUILDING_LIBRARY)
#define DQM_API __attribute__((visibility("default")))
#else
#define DQM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum dqm_status {
  DQM_OK = 0,
  DQM_ERR_ARGUMENT = 1, /* API misuse: null pointer, buffer too small */
  DQM_ERR_CONFIG = 2,
  DQM_ERR_NUMERICAL = 3,
  DQM_ERR_IO = 4
} dqm_status;

typedef struct dqm_scenario dqm_scenario;

DQM_API const char* dqm_version(void);

/* JSON error record of the last failed call on this thread; "" after success. */
DQM_API const char* dqm_last_error(void);

DQM_API dqm_status dqm_scenario_parse(const char* text, dqm_scenario** out);
DQM_API dqm_status dqm_scenario_load(const char* path, dqm_scenario** out);
/* Replaces (or adds) one key and revalidates the whole scenario. */
DQM_API dqm_status dqm_scenario_set(dqm_scenario* scenario, const char* key, const char* value);
DQM_API void dqm_scenario_free(dqm_scenario* scenario);

/* Copies the canonical key = value listing into buf. *needed receives the
 * size including the terminator; DQM_ERR_ARGUMENT when capacity is short. */
DQM_API dqm_status dqm_scenario_resolved(const dqm_scenario* scenario, char* buf, size_t capacity,
                                         size_t* needed);

/* Output root: DQM_OUTPUT_ROOT, else the current directory. */
DQM_API dqm_status dqm_output_root(char* buf, size_t capacity, size_t* needed);

/* Runs the scenario below root (NULL selects dqm_output_root) and copies the
 * output directory into out_dir when it is non-null. */
DQM_API dqm_status dqm_run(const dqm_scenario* scenario, const char* root, char* out_dir,
                           size_t capacity);

/* Runs one scenario per value of `axis` and writes sweep.csv / sweep.json.
 * errors receives `count` values; slope receives the fitted order (resolution
 * axes) or log-log slope, NaN when undefined. */
DQM_API dqm_status dqm_sweep(const dqm_scenario* scenario, const char* axis,
                             const char* const* values, size_t count, const char* oracle,
                             const char* root, double* errors, double* slope);

DQM_API dqm_status dqm_oracle_eval(const dqm_scenario* scenario, const char* name, double t,
                                   double* value);

/* metric: "l1" (mean absolute difference) or "linf". */
DQM_API dqm_status dqm_compare(const char* csv_a, const char* csv_b, const char* metric,
                               double* value);

#ifdef __cplusplus
}
#endif

#endif
