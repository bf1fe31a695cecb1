/* C interface to the variational state estimation library.
 *
 * Every function returning vse_status reports failures through the status
 * code; the message of the most recent failure on the calling thread is
 * available from vse_last_error(). Handles are opaque and must be released
 * with the matching *_free function (NULL is accepted). */
#ifndef VSE_VSE_H
#define VSE_VSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(VSE_BUILDING_LIBRARY)
#define VSE_API __attribute__((visibility("default")))
#else
#define VSE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vse_status {
  VSE_OK = 0,
  VSE_ERR_INPUT = 1,   /* invalid argument, config or data */
  VSE_ERR_NUMERIC = 2, /* non positive definite matrix, vanishing weights, ... */
  VSE_ERR_IO = 3,      /* file could not be read or written */
  VSE_ERR_INTERNAL = 4
} vse_status;

typedef struct vse_config vse_config;
typedef struct vse_paths vse_paths;
typedef struct vse_posterior vse_posterior;
typedef struct vse_verify_report vse_verify_report;

VSE_API const char* vse_version(void);
VSE_API const char* vse_last_error(void);
VSE_API const char* vse_status_name(vse_status status);

/* Staircase configuration. Defaults: M=4, p=0.9, phi0=0.5, sigma0=0.5, R=1,
 * T=129, 100 trials, 10 smoother iterations, 1 thread. */
VSE_API vse_status vse_config_default(vse_config** out);
VSE_API vse_status vse_config_load(const char* path, vse_config** out);
VSE_API vse_status vse_config_set_seed(vse_config* cfg, uint64_t seed);
VSE_API vse_status vse_config_set_trials(vse_config* cfg, size_t trials);
VSE_API vse_status vse_config_set_horizon(vse_config* cfg, int64_t horizon);
VSE_API vse_status vse_config_set_regimes(vse_config* cfg, int64_t regimes);
VSE_API vse_status vse_config_set_smoother_iters(vse_config* cfg, int iters);
VSE_API vse_status vse_config_set_threads(vse_config* cfg, unsigned threads);
VSE_API vse_status vse_config_use_full_scale(vse_config* cfg);
VSE_API vse_status vse_config_get_seed(const vse_config* cfg, uint64_t* seed);
VSE_API vse_status vse_config_get_trials(const vse_config* cfg, size_t* trials);
VSE_API vse_status vse_config_get_horizon(const vse_config* cfg, int64_t* horizon);
VSE_API vse_status vse_config_get_smoother_iters(const vse_config* cfg, int* iters);
VSE_API vse_status vse_config_get_threads(const vse_config* cfg, unsigned* threads);
VSE_API void vse_config_free(vse_config* cfg);

/* Regime, state and observation paths. Regimes are 0-based here and 1-based
 * in the JSON files. */
VSE_API vse_status vse_simulate(const vse_config* cfg, uint64_t trial, vse_paths** out);
VSE_API vse_status vse_paths_read(const char* path, vse_paths** out);
VSE_API vse_status vse_paths_write(const vse_paths* paths, const char* path);
VSE_API vse_status vse_paths_length(const vse_paths* paths, size_t* length);
VSE_API vse_status vse_paths_observation_dim(const vse_paths* paths, size_t* dim);
/* Copies y_t into y[0..dim). */
VSE_API vse_status vse_paths_observation(const vse_paths* paths, size_t t, double* y);
VSE_API void vse_paths_free(vse_paths* paths);

/* VJGM(0) and VJGM(iters) on the configured model, with the horizon taken
 * from the data. The filter posterior holds the backward-propagated
 * marginals; the per-step filtering marginals are kept alongside. */
VSE_API vse_status vse_filter(const vse_config* cfg, const vse_paths* paths, vse_posterior** out);
VSE_API vse_status vse_smooth(const vse_config* cfg, const vse_paths* paths, int iters, vse_posterior** out);
VSE_API vse_status vse_posterior_elbo(const vse_posterior* post, double* elbo);
VSE_API vse_status vse_posterior_length(const vse_posterior* post, size_t* length);
VSE_API vse_status vse_posterior_regimes(const vse_posterior* post, size_t* regimes);
VSE_API vse_status vse_posterior_state_dim(const vse_posterior* post, size_t* dim);
/* Marginal at time t: f[0..M), mean[0..d), cov[0..d*d) row-major. Any output
 * pointer may be NULL. */
VSE_API vse_status vse_posterior_marginal(const vse_posterior* post, size_t t, double* f, double* mean,
                                          double* cov);
/* Same for the filtering marginal; fails with VSE_ERR_INPUT for smoother
 * outputs. */
VSE_API vse_status vse_posterior_filtering_marginal(const vse_posterior* post, size_t t, double* f,
                                                    double* mean, double* cov);
VSE_API vse_status vse_posterior_write(const vse_posterior* post, const char* path);
VSE_API void vse_posterior_free(vse_posterior* post);

/* Runs the Monte Carlo comparison and writes metrics.csv and summary.json
 * into out_dir. threads = 0 uses the configured thread count. */
VSE_API vse_status vse_experiment_run(const vse_config* cfg, const char* out_dir, unsigned threads);

typedef struct vse_verify_options {
  size_t instances;
  int64_t max_T;
  int64_t max_M;
  uint64_t seed;
  int inject_violation;
} vse_verify_options;

VSE_API vse_verify_options vse_verify_defaults(void);
VSE_API vse_status vse_verify(const vse_verify_options* options, vse_verify_report** out);
VSE_API int vse_verify_report_passed(const vse_verify_report* report);
VSE_API size_t vse_verify_report_checks(const vse_verify_report* report);
/* Human-readable pass/fail table; owned by the report. */
VSE_API const char* vse_verify_report_table(const vse_verify_report* report);
VSE_API void vse_verify_report_free(vse_verify_report* report);

#ifdef __cplusplus
}
#endif

#endif /* VSE_VSE_H */
