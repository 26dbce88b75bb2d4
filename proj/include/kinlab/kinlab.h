#ifndef KINLAB_KINLAB_H
#define KINLAB_KINLAB_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(KINLAB_BUILDING_LIBRARY)
#define KINLAB_API __attribute__((visibility("default")))
#else
#define KINLAB_API
#endif

typedef enum kinlab_status {
  KINLAB_OK = 0,
  KINLAB_CHECK_FAILED = 1,  /* a verification ran and its property failed */
  KINLAB_ERR_CONFIG = 2,
  KINLAB_ERR_VALIDATION = 3,
  KINLAB_ERR_NUMERICAL = 4,
  KINLAB_ERR_IO = 5,
  KINLAB_ERR_ARGUMENT = 6,
  KINLAB_ERR_INTERNAL = 7
} kinlab_status;

/* Message for the most recent non-OK status on this thread ("" if none).
   Valid until the next call into the library from the same thread. */
KINLAB_API const char* kinlab_last_error(void);
KINLAB_API const char* kinlab_version(void);
KINLAB_API const char* kinlab_status_name(kinlab_status status);

/* Strings returned through char** are owned by the caller. */
KINLAB_API void kinlab_string_free(char* s);

typedef struct kinlab_config kinlab_config;

KINLAB_API kinlab_status kinlab_config_parse(const char* text, kinlab_config** out);
KINLAB_API kinlab_status kinlab_config_load(const char* path, kinlab_config** out);
KINLAB_API kinlab_status kinlab_config_set(kinlab_config* config, const char* section, const char* key,
                                           const char* value);
KINLAB_API kinlab_status kinlab_config_emit(const kinlab_config* config, char** text);
KINLAB_API void kinlab_config_free(kinlab_config* config);

/* Every run writes its outputs and manifest.json into out_dir and, when
   summary is non-null, returns a JSON summary. KINLAB_CHECK_FAILED carries
   the failure description in kinlab_last_error(). */
KINLAB_API kinlab_status kinlab_run_simulate(const kinlab_config* config, const char* out_dir, char** summary);
KINLAB_API kinlab_status kinlab_run_sweep(const kinlab_config* config, const char* out_dir, char** summary);
KINLAB_API kinlab_status kinlab_run_verify_green(const kinlab_config* config, int manufactured,
                                                 const char* out_dir, char** summary);
KINLAB_API kinlab_status kinlab_run_verify_energy(const kinlab_config* config, const char* out_dir,
                                                  char** summary);
KINLAB_API kinlab_status kinlab_run_verify_carleman(const kinlab_config* config, const char* out_dir,
                                                    char** summary);
KINLAB_API kinlab_status kinlab_run_check_weight(const kinlab_config* config, const char* out_dir,
                                                 char** summary);
KINLAB_API kinlab_status kinlab_run_exit_time(const kinlab_config* config, double t, double x, double y,
                                              double vx, double vy, const char* out_dir, char** summary);
/* truth_csv may be null. */
KINLAB_API kinlab_status kinlab_run_reconstruct(const kinlab_config* config, const char* data_csv,
                                                const char* truth_csv, const char* out_dir, char** summary);

typedef struct kinlab_exit {
  int never;
  double t_minus;
  double x_minus[2];
  double v_minus[2];
  double normal[2];
  double n_dot_v;
} kinlab_exit;

/* Backward exit from (t, x, v) under the config's force field and spatial box. */
KINLAB_API kinlab_status kinlab_backward_exit(const kinlab_config* config, double t, double x, double y,
                                              double vx, double vy, kinlab_exit* out);

#ifdef __cplusplus
}
#endif

#endif
