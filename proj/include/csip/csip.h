#ifndef CSIP_CSIP_H
#define CSIP_CSIP_H

/* C interface to the CSI predictor library. Every function returns a
 * csip_status; on failure csip_last_error() describes the cause (per
 * thread, valid until the next failing call on that thread). Handles are
 * opaque and owned by the caller, who releases them with the matching
 * *_free function. */

#include <stddef.h>
#include <stdint.h>

#if defined(CSIP_BUILDING_LIBRARY)
#define CSIP_API __attribute__((visibility("default")))
#else
#define CSIP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum csip_status {
  CSIP_OK = 0,
  CSIP_E_DIMENSION = 1,
  CSIP_E_CONFIG = 2,
  CSIP_E_CONTRACT = 3,
  CSIP_E_NUMERIC = 4,
  CSIP_E_IO = 5,
  CSIP_E_MEASUREMENT = 6,
  CSIP_E_INVALID_ARGUMENT = 7,
  CSIP_E_INTERNAL = 8
} csip_status;

typedef struct csip_config csip_config;
typedef struct csip_model csip_model;

/* Receives progress lines and text results. `text` is only valid during
 * the call. */
typedef void (*csip_text_fn)(const char* text, void* user);

CSIP_API const char* csip_version(void);
CSIP_API const char* csip_last_error(void);
CSIP_API const char* csip_status_name(csip_status status);

/* Variant registry. */
CSIP_API size_t csip_variant_count(void);
CSIP_API const char* csip_variant_name(size_t index);

/* Experiment configuration. */
CSIP_API csip_status csip_config_from_profile(const char* profile, csip_config** out);
/* Keys absent from the JSON document keep their value from `base`. */
CSIP_API csip_status csip_config_parse(const char* json, const csip_config* base, csip_config** out);
CSIP_API csip_status csip_config_load(const char* path, const csip_config* base, csip_config** out);
CSIP_API csip_status csip_config_clone(const csip_config* cfg, csip_config** out);
/* Writes the JSON rendering, NUL-terminated, when it fits in `capacity`;
 * `needed` always receives the required size including the terminator. */
CSIP_API csip_status csip_config_render(const csip_config* cfg, char* buffer, size_t capacity,
                                        size_t* needed);
CSIP_API csip_status csip_config_set_out_dir(csip_config* cfg, const char* out_dir);
CSIP_API csip_status csip_config_set_seeds(csip_config* cfg, size_t seeds);
/* Comma-separated variant names. */
CSIP_API csip_status csip_config_set_variants(csip_config* cfg, const char* variants);
CSIP_API csip_status csip_config_validate(const csip_config* cfg);
CSIP_API void csip_config_free(csip_config* cfg);

/* Commands. `log` may be NULL. Each file written is reported through
 * `files` when non-NULL. */
CSIP_API csip_status csip_cmd_generate(const csip_config* cfg, csip_text_fn log, csip_text_fn files, void* user);
CSIP_API csip_status csip_cmd_train(const csip_config* cfg, csip_text_fn log, csip_text_fn files, void* user);
CSIP_API csip_status csip_cmd_ablate(const csip_config* cfg, csip_text_fn log, csip_text_fn files, void* user);
CSIP_API csip_status csip_cmd_bench(const csip_config* cfg, csip_text_fn log, csip_text_fn files, void* user);
/* The summary table is delivered once through `summary`. */
CSIP_API csip_status csip_cmd_report(const csip_config* cfg, csip_text_fn log, csip_text_fn summary, void* user);

/* Models. A fresh model takes its dimensions from `cfg`. */
CSIP_API csip_status csip_model_create(const char* variant, const csip_config* cfg, uint64_t init_seed,
                                       csip_model** out);
CSIP_API csip_status csip_model_load(const char* path, csip_model** out);
CSIP_API csip_status csip_model_save(const csip_model* model, const char* path);
CSIP_API csip_status csip_model_param_count(const csip_model* model, size_t* out);
CSIP_API csip_status csip_model_gflops(const csip_model* model, double* out);
/* Input and output sizes of one sample: N_P x D_in and N_L x C. */
CSIP_API csip_status csip_model_io_shape(const csip_model* model, size_t* n_p, size_t* d_in, size_t* n_l,
                                         size_t* channels);
/* Inference on normalized inputs [batch, N_P, D_in] into [batch, N_L, C]. */
CSIP_API csip_status csip_model_predict(const csip_model* model, const double* inputs, size_t batch,
                                        double* outputs);
CSIP_API void csip_model_free(csip_model* model);

#ifdef __cplusplus
}
#endif

#endif /* CSIP_CSIP_H */
