#ifndef DCGRID_DCGRID_H
#define DCGRID_DCGRID_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DCG_API __declspec(dllexport)
#else
#define DCG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dcg_status {
    DCG_OK = 0,
    DCG_ERR_PARSE = 1,
    DCG_ERR_CONFIG = 2,
    DCG_ERR_PARAMETER = 3,
    DCG_ERR_DOMAIN = 4,
    DCG_ERR_SINGULARITY = 5,
    DCG_ERR_NUMERICAL = 6,
    DCG_ERR_EQUILIBRIUM = 7,
    DCG_ERR_INFEASIBLE = 8,
    DCG_ERR_TERMINAL_SET = 9,
    DCG_ERR_DIVERGENCE = 10,
    DCG_ERR_IO = 11,
    DCG_ERR_INVALID_ARGUMENT = 12,
    DCG_ERR_UNKNOWN_SUITE = 13,
    DCG_ERR_INTERNAL = 14
} dcg_status;

typedef enum dcg_line_dynamics { DCG_LINES_ALGEBRAIC = 0, DCG_LINES_DYNAMIC = 1 } dcg_line_dynamics;

typedef struct dcg_scenario dcg_scenario;
typedef struct dcg_result dcg_result;

typedef struct dcg_monitor {
    const char* name;   /* owned by the result */
    int pass;
    double metric;
    double threshold;
    const char* detail; /* owned by the result */
} dcg_monitor;

DCG_API const char* dcg_version(void);
DCG_API const char* dcg_status_string(dcg_status status);
/* Message of the last failing call on this thread; empty when none. */
DCG_API const char* dcg_last_error(void);

DCG_API dcg_status dcg_scenario_load_file(const char* path, dcg_scenario** out);
DCG_API dcg_status dcg_scenario_load_string(const char* json, dcg_scenario** out);
DCG_API void dcg_scenario_free(dcg_scenario* scenario);
DCG_API dcg_status dcg_scenario_set_seed(dcg_scenario* scenario, uint64_t seed);
DCG_API dcg_status dcg_scenario_set_line_dynamics(dcg_scenario* scenario, dcg_line_dynamics mode);
DCG_API dcg_status dcg_scenario_set_decimation(dcg_scenario* scenario, int decimation);
DCG_API dcg_status dcg_scenario_hash(const dcg_scenario* scenario, uint64_t* out);
/* Writes "run-<hash>-seed<seed>" into buf (NUL-terminated). */
DCG_API dcg_status dcg_scenario_run_directory(const dcg_scenario* scenario, char* buf, size_t size);
DCG_API dcg_status dcg_scenario_node_count(const dcg_scenario* scenario, size_t* out);

/* Returns DCG_OK with a result whenever the run started; an aborted run is
   reported through dcg_result_error. */
DCG_API dcg_status dcg_run(const dcg_scenario* scenario, dcg_result** out);
/* DCG_OK if the run completed, otherwise the abort kind; message is optional. */
DCG_API dcg_status dcg_result_error(const dcg_result* result, const char** message);
DCG_API int dcg_result_all_passed(const dcg_result* result);
DCG_API size_t dcg_result_monitor_count(const dcg_result* result);
DCG_API dcg_status dcg_result_monitor(const dcg_result* result, size_t index, dcg_monitor* out);
DCG_API dcg_status dcg_result_write(const dcg_result* result, const char* directory);
/* Caller frees *json with dcg_free_string. */
DCG_API dcg_status dcg_result_report_json(const dcg_result* result, char** json);
DCG_API void dcg_result_free(dcg_result* result);

DCG_API dcg_status dcg_analyze(const dcg_scenario* scenario, double input_bound, char** json);
/* suite: one of the names listed by dcg_verify_suites, or "all". */
DCG_API dcg_status dcg_verify(const char* suite, uint64_t seed, char** json, int* passed);
/* Comma-separated suite names. */
DCG_API const char* dcg_verify_suites(void);
DCG_API void dcg_free_string(char* s);

#ifdef __cplusplus
}
#endif

#endif
