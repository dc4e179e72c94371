#ifndef ATTRIVAE_ATTRIVAE_H
#define ATTRIVAE_ATTRIVAE_H

/* C interface of the attribute-regularized VAE toolkit.
 *
 * Every call returns an attrivae_status; on failure the message of the last
 * error on the calling thread is available from attrivae_last_error().
 * Strings returned through char** are owned by the caller and released with
 * attrivae_string_free(). */

#include <stddef.h>

#if defined(_WIN32)
#if defined(ATTRIVAE_BUILDING)
#define ATTRIVAE_API __declspec(dllexport)
#else
#define ATTRIVAE_API __declspec(dllimport)
#endif
#else
#define ATTRIVAE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum attrivae_status {
  ATTRIVAE_OK = 0,
  ATTRIVAE_ERR_RUNTIME = 1,   /* I/O and other runtime failures */
  ATTRIVAE_ERR_CONFIG = 2,    /* invalid configuration or arguments */
  ATTRIVAE_ERR_NUMERICAL = 3  /* NaN/Inf during training or evaluation */
} attrivae_status;

typedef struct attrivae_config attrivae_config;
typedef struct attrivae_model attrivae_model;

typedef void (*attrivae_log_fn)(const char* line, void* user);

ATTRIVAE_API const char* attrivae_version(void);
ATTRIVAE_API const char* attrivae_last_error(void);
ATTRIVAE_API void attrivae_string_free(char* s);

/* Run configuration: optional JSON file (NULL for defaults) plus
 * "key.path=value" overrides. */
ATTRIVAE_API attrivae_status attrivae_config_load(const char* json_path, const char* const* overrides,
                                                  size_t n_overrides, attrivae_config** out);
ATTRIVAE_API attrivae_status attrivae_config_from_string(const char* json_text, attrivae_config** out);
ATTRIVAE_API attrivae_status attrivae_config_set(attrivae_config* config, const char* assignment);
ATTRIVAE_API attrivae_status attrivae_config_to_json(const attrivae_config* config, char** out_json);
ATTRIVAE_API void attrivae_config_free(attrivae_config* config);

/* Runs one of synth, train, eval, traverse, attend, project, sweep. Progress
 * lines go to `log` (may be NULL); the summary is returned in out_summary
 * (may be NULL). */
ATTRIVAE_API attrivae_status attrivae_run(const attrivae_config* config, const char* command, attrivae_log_fn log,
                                          void* user, char** out_summary);

/* Frozen model from a checkpoint directory. Volumes are float32 in C order
 * (x, y, z) with the model's image shape. */
ATTRIVAE_API attrivae_status attrivae_model_load(const char* checkpoint_dir, attrivae_model** out);
ATTRIVAE_API void attrivae_model_free(attrivae_model* model);
ATTRIVAE_API int attrivae_model_latent_dim(const attrivae_model* model);
ATTRIVAE_API attrivae_status attrivae_model_image_shape(const attrivae_model* model, int shape[3]);
/* Latent dimension of a mapped attribute. */
ATTRIVAE_API attrivae_status attrivae_model_mapped_dim(const attrivae_model* model, const char* attribute, int* dim);
ATTRIVAE_API attrivae_status attrivae_model_encode(const attrivae_model* model, const float* volume, size_t n_voxels,
                                                   double* mu, double* logvar);
ATTRIVAE_API attrivae_status attrivae_model_decode(const attrivae_model* model, const double* z, float* volume,
                                                   size_t n_voxels);
ATTRIVAE_API attrivae_status attrivae_model_classify(const attrivae_model* model, const double* z,
                                                     double* probability);
/* Attention heat map of latent dimension `dim` at input resolution. */
ATTRIVAE_API attrivae_status attrivae_model_attention(const attrivae_model* model, const float* volume,
                                                      size_t n_voxels, int dim, float* heat);

/* Loss terms on plain arrays. mu/logvar hold n samples of length d
 * (sample-major); z_dim and attr hold one latent coordinate and one
 * attribute per sample. */
ATTRIVAE_API attrivae_status attrivae_kl_loss(const double* mu, const double* logvar, size_t n, size_t d,
                                              double* out);
ATTRIVAE_API attrivae_status attrivae_attr_reg_loss(const double* z_dim, const double* attr, size_t n, double delta,
                                                    double* out);

#ifdef __cplusplus
}
#endif

#endif /* ATTRIVAE_ATTRIVAE_H */
