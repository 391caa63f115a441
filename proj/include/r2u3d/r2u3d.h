/* C interface to the r2u3d volumetric segmentation toolkit.
 *
 * Every function returns an r2u3d_status. On failure the thread-local
 * message from r2u3d_last_error() describes the cause; outputs are left
 * untouched. Handles are opaque and released with their *_free function.
 * Strings returned through char** are released with r2u3d_string_free.
 */
#ifndef R2U3D_R2U3D_H
#define R2U3D_R2U3D_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(R2U3D_BUILDING_LIBRARY)
#    define R2U3D_API __declspec(dllexport)
#  else
#    define R2U3D_API __declspec(dllimport)
#  endif
#else
#  define R2U3D_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum r2u3d_status {
  R2U3D_OK = 0,
  R2U3D_ERR_ARGUMENT = 1,
  R2U3D_ERR_CONFIG = 2,
  R2U3D_ERR_SHAPE = 3,
  R2U3D_ERR_NON_FINITE = 4,
  R2U3D_ERR_IO = 5,
  R2U3D_ERR_FORMAT = 6,
  R2U3D_ERR_STATE = 7,
  R2U3D_ERR_VERIFICATION = 8,
  R2U3D_ERR_INTERNAL = 9
} r2u3d_status;

typedef struct r2u3d_config r2u3d_config;
typedef struct r2u3d_model r2u3d_model;
typedef struct r2u3d_volume r2u3d_volume;

/* ---- library ---------------------------------------------------------- */

R2U3D_API const char* r2u3d_last_error(void);
R2U3D_API const char* r2u3d_version(void);
R2U3D_API void r2u3d_string_free(char* s);
/* Nonzero: one worker thread and a fixed reduction order. */
R2U3D_API r2u3d_status r2u3d_set_deterministic(int on);
R2U3D_API r2u3d_status r2u3d_set_threads(int threads);

/* ---- run configuration ------------------------------------------------ */

/* JSON document; relative paths resolve against the file's directory. */
R2U3D_API r2u3d_status r2u3d_config_load(const char* path, r2u3d_config** out);
R2U3D_API r2u3d_status r2u3d_config_parse(const char* json, const char* base_dir, r2u3d_config** out);
/* Defaults with the model section set to "default" or "dynamic". */
R2U3D_API r2u3d_status r2u3d_config_from_preset(const char* preset, r2u3d_config** out);
/* Replaces the model section with a preset. */
R2U3D_API r2u3d_status r2u3d_config_set_preset(r2u3d_config* cfg, const char* preset);
R2U3D_API r2u3d_status r2u3d_config_set_seed(r2u3d_config* cfg, uint64_t seed);
R2U3D_API r2u3d_status r2u3d_config_set_threshold(r2u3d_config* cfg, double threshold);
R2U3D_API r2u3d_status r2u3d_config_set_target_depth(r2u3d_config* cfg, int64_t depth);
R2U3D_API r2u3d_status r2u3d_config_set_deterministic(r2u3d_config* cfg, int on);
R2U3D_API r2u3d_status r2u3d_config_get_deterministic(const r2u3d_config* cfg, int* out);
R2U3D_API r2u3d_status r2u3d_config_get_threshold(const r2u3d_config* cfg, double* out);
/* data.target_depth; 0 keeps the scan depth. */
R2U3D_API r2u3d_status r2u3d_config_get_target_depth(const r2u3d_config* cfg, int64_t* out);
/* Configured path ("checkpoint", "report" or "train_log"); empty when unset. */
R2U3D_API r2u3d_status r2u3d_config_get_path(const r2u3d_config* cfg, const char* which, char** out);
R2U3D_API r2u3d_status r2u3d_config_to_json(const r2u3d_config* cfg, char** out);
R2U3D_API void r2u3d_config_free(r2u3d_config* cfg);

/* ---- model ------------------------------------------------------------ */

/* Fresh He-initialized model from the config's model section and seed. */
R2U3D_API r2u3d_status r2u3d_model_build(const r2u3d_config* cfg, r2u3d_model** out);
R2U3D_API r2u3d_status r2u3d_model_load(const char* checkpoint_path, r2u3d_model** out);
R2U3D_API r2u3d_status r2u3d_model_save(const r2u3d_model* model, const char* checkpoint_path);
R2U3D_API void r2u3d_model_free(r2u3d_model* model);

R2U3D_API r2u3d_status r2u3d_model_parameter_count(const r2u3d_model* model, int64_t* out);
/* Published total for the model's variant. */
R2U3D_API r2u3d_status r2u3d_model_reference_count(const r2u3d_model* model, int64_t* out);
/* Layer table for a cubic or rectangular input of the given (D, H, W). */
R2U3D_API r2u3d_status r2u3d_model_summary(const r2u3d_model* model, const int64_t extent[3], char** out);
/* Newline-separated parameter paths in storage order. */
R2U3D_API r2u3d_status r2u3d_model_parameter_names(const r2u3d_model* model, char** out);
/* Element count of one parameter tensor. */
R2U3D_API r2u3d_status r2u3d_model_parameter_size(const r2u3d_model* model, const char* path, size_t* out);
R2U3D_API r2u3d_status r2u3d_model_get_parameter(const r2u3d_model* model, const char* path, float* values,
                                                 size_t count);
R2U3D_API r2u3d_status r2u3d_model_set_parameter(r2u3d_model* model, const char* path, const float* values,
                                                 size_t count);
/* Voxel-wise foreground probabilities for a volume of the same dims. */
R2U3D_API r2u3d_status r2u3d_model_forward(const r2u3d_model* model, const r2u3d_volume* image,
                                           r2u3d_volume** out);

/* ---- volumes ---------------------------------------------------------- */

/* ".mhd" selects the MetaImage reader; anything else the internal format. */
R2U3D_API r2u3d_status r2u3d_volume_read(const char* path, r2u3d_volume** out);
/* dims = (D, H, W); data holds D*H*W floats, W fastest; NULL data gives zeros. */
R2U3D_API r2u3d_status r2u3d_volume_create(const int64_t dims[3], const float* data, r2u3d_volume** out);
/* Internal format: the manifest at `path` plus `path`.raw. */
R2U3D_API r2u3d_status r2u3d_volume_write(const r2u3d_volume* volume, const char* path);
R2U3D_API r2u3d_status r2u3d_volume_dims(const r2u3d_volume* volume, int64_t dims[3]);
R2U3D_API r2u3d_status r2u3d_volume_spacing(const r2u3d_volume* volume, double spacing[3]);
/* Borrowed pointer valid until the volume is freed. */
R2U3D_API r2u3d_status r2u3d_volume_data(const r2u3d_volume* volume, const float** out, size_t* count);
R2U3D_API void r2u3d_volume_free(r2u3d_volume* volume);

/* ---- pipeline --------------------------------------------------------- */

/* Depth resampling (target_depth <= 0 keeps the depth) and min-max scaling. */
R2U3D_API r2u3d_status r2u3d_preprocess_image(const r2u3d_volume* image, int64_t target_depth, r2u3d_volume** out);
/* Resamples both with one index map, scales the image, re-binarizes the mask. */
R2U3D_API r2u3d_status r2u3d_preprocess_pair(const r2u3d_volume* image, const r2u3d_volume* mask,
                                             int64_t target_depth, r2u3d_volume** out_image,
                                             r2u3d_volume** out_mask);
/* Preprocesses `image`, runs the model and thresholds. prob may be NULL. */
R2U3D_API r2u3d_status r2u3d_segment(const r2u3d_model* model, const r2u3d_volume* image, int64_t target_depth,
                                     double threshold, r2u3d_volume** mask, r2u3d_volume** prob);

typedef struct r2u3d_train_outputs {
  /* Each may be NULL or empty to skip that output. */
  const char* train_log_path;
  const char* checkpoint_path;
  /* Nonzero adds wall_time to every TrainLog record. */
  int timestamps;
} r2u3d_train_outputs;

/* Trains `model` in place on the config's data.train scans. Intermediate
 * checkpoints (train.checkpoint_every) go to <checkpoint_path>.iter<N>; the
 * final one to checkpoint_path. */
R2U3D_API r2u3d_status r2u3d_train(r2u3d_model* model, const r2u3d_config* cfg, const r2u3d_train_outputs* outputs);

/* Scores data.eval scans: JSON lines (one per scan plus a mean record) and a text table. */
R2U3D_API r2u3d_status r2u3d_evaluate(const r2u3d_model* model, const r2u3d_config* cfg, char** jsonl,
                                      char** table);

/* Finite-difference suite. inject_fault names an op whose backward is
 * deliberately corrupted (NULL for none). passed is set to 0 or 1. */
R2U3D_API r2u3d_status r2u3d_gradcheck(uint64_t seed, const char* inject_fault, char** report, int* passed);

typedef struct r2u3d_smoke_report {
  double baseline_soft_dsc;
  double final_soft_dsc;
  int64_t steps;
  double seconds;
} r2u3d_smoke_report;

/* iterations < 0 uses the built-in default. */
R2U3D_API r2u3d_status r2u3d_overfit_smoke(uint64_t seed, int64_t iterations, r2u3d_smoke_report* out);

/* Writes <dir>/phantomNN_image.vol and <dir>/phantomNN_mask.vol. */
R2U3D_API r2u3d_status r2u3d_generate_phantoms(const char* dir, int count, const int64_t dims[3], double noise_sigma,
                                               uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* R2U3D_R2U3D_H */
