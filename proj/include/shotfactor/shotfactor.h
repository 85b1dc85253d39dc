#ifndef SHOTFACTOR_SHOTFACTOR_H
#define SHOTFACTOR_SHOTFACTOR_H

#include <stddef.h>
#include <stdint.h>

#if defined(SHOTFACTOR_BUILDING)
#define SF_API __attribute__((visibility("default")))
#else
#define SF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sf_status {
    SF_OK = 0,
    SF_ERR_INVALID_ARGUMENT = 1,
    SF_ERR_IO = 2,
    SF_ERR_PARSE = 3,
    SF_ERR_NUMERIC = 4,
    SF_ERR_STAGE = 5,
    SF_ERR_INTERNAL = 99
} sf_status;

typedef struct sf_config sf_config;

/* Called once per progress line; may be NULL. */
typedef void (*sf_log_fn)(const char* line, void* user);

SF_API const char* sf_version(void);
SF_API const char* sf_status_name(sf_status status);
/* Message of the last failure on the calling thread ("" when none). */
SF_API const char* sf_last_error(void);

SF_API sf_status sf_config_create(sf_config** out);
SF_API void sf_config_destroy(sf_config* config);
SF_API sf_status sf_config_load(sf_config* config, const char* path);
SF_API sf_status sf_config_set(sf_config* config, const char* key, const char* value);
/* Copies the value into buf (NUL-terminated); *needed receives the full length + 1. */
SF_API sf_status sf_config_get(const sf_config* config, const char* key, char* buf, size_t size, size_t* needed);
/* Applies SHOTFACTOR_OUT when set in the environment. */
SF_API sf_status sf_config_apply_environment(sf_config* config);
SF_API void sf_config_set_logger(sf_config* config, sf_log_fn fn, void* user);

SF_API sf_status sf_run_synth(const sf_config* config);
SF_API sf_status sf_run_ingest(const sf_config* config);
SF_API sf_status sf_run_fit_lgcp(const sf_config* config);
SF_API sf_status sf_run_factorize(const sf_config* config);
SF_API sf_status sf_run_fit_efficiency(const sf_config* config);
SF_API sf_status sf_run_evaluate(const sf_config* config);
SF_API sf_status sf_run_pipeline(const sf_config* config);

/* Writes row `id` of a labelled surface CSV (with grid header) as a P5 graymap. */
SF_API sf_status sf_render_surface_row(const char* surface_csv, const char* id, const char* pgm_path);
/* Writes n values on a court of the given extent and tile size as a P5 graymap. */
SF_API sf_status sf_render_pgm(const double* values, size_t n, double court_width, double court_length,
                               double tile_width, double tile_length, const char* pgm_path);

#ifdef __cplusplus
}
#endif

#endif
