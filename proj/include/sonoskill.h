/* sonoskill: forearm-ultrasound manipulation-skill classification and
 * fingertip-force regression.
 *
 * C API over the shared library. All functions return an ssk_status; on
 * failure ssk_last_error() gives a thread-local description of what went
 * wrong. Handles are opaque and must be released with their close/free
 * function.
 */
#ifndef SONOSKILL_H
#define SONOSKILL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ssk_status {
  SSK_OK = 0,
  SSK_ERR_INVALID_ARGUMENT = 1,
  SSK_ERR_SHAPE_MISMATCH = 2,
  SSK_ERR_IO = 3,
  SSK_ERR_MALFORMED_HEADER = 4,
  SSK_ERR_TRUNCATED_PAYLOAD = 5,
  SSK_ERR_UNSUPPORTED_DTYPE = 6,
  SSK_ERR_VERSION_MISMATCH = 7,
  SSK_ERR_CORRUPTION = 8,
  SSK_ERR_STATE = 9,
  SSK_ERR_UNKNOWN = 10
} ssk_status;

const char* ssk_status_name(ssk_status status);
/* thread-local message for the most recent failure in this thread */
const char* ssk_last_error(void);
const char* ssk_version_string(void);

/* ---- heads ---- */
#define SSK_HEAD_SKILL 0
#define SSK_HEAD_FORCE 1

#define SSK_NUM_SKILLS 5

/* ---- synthetic dataset ---- */

typedef struct ssk_synth_params {
  int subjects;
  int frames_per_skill;
  int image_size;
  int segment_len;
  double peak_min;
  double peak_max;
  double noise_level;
  uint64_t seed;
} ssk_synth_params;

void ssk_synth_params_defaults(ssk_synth_params* params);
/* generates the phantom dataset and writes it under out_dir */
ssk_status ssk_synth_generate(const ssk_synth_params* params, const char* out_dir);

typedef struct ssk_dataset ssk_dataset;

typedef struct ssk_dataset_info {
  int subjects;
  int frames_per_skill;
  int image_size;
  int segment_len;
  double peak_min;
  double peak_max;
  double noise_level;
  uint64_t seed;
} ssk_dataset_info;

ssk_status ssk_dataset_open(const char* dir, ssk_dataset** out);
void ssk_dataset_close(ssk_dataset* dataset);
ssk_status ssk_dataset_get_info(const ssk_dataset* dataset, ssk_dataset_info* out);

/* ---- models ---- */

typedef struct ssk_model ssk_model;

ssk_status ssk_model_load(const char* path, ssk_model** out);
ssk_status ssk_model_save(const ssk_model* model, const char* path);
void ssk_model_free(ssk_model* model);
/* SSK_HEAD_SKILL or SSK_HEAD_FORCE */
int ssk_model_head(const ssk_model* model);
int ssk_model_input_size(const ssk_model* model);
ssk_status ssk_model_param_count(const ssk_model* model, int64_t* trainable,
                                 int64_t* non_trainable);

/* pixels: input_size*input_size floats in [0,1], row-major.
 * Skill models fill outputs[0..4] with class probabilities and
 * *predicted_class with the argmax; force models fill outputs[0] with the
 * force in newtons and set *predicted_class to 0. Either out pointer may be
 * NULL. */
ssk_status ssk_model_predict(const ssk_model* model, const float* pixels, float* outputs,
                             int* predicted_class);

/* ---- training ---- */

typedef struct ssk_train_params {
  int head;                 /* SSK_HEAD_* */
  int subject;
  int skill;                /* force head: which skill's frames; ignored for skill head */
  int channels[5];
  int dense_units;
  double dropout;
  int with_bias;
  int epochs;
  double learning_rate;
  int batch_size;
  int holdout_fold;         /* -1 = train on everything, no evaluation */
  int folds;
  int fold_mode;            /* 0 = rotating contiguous blocks, 1 = strided */
  uint64_t seed;
} ssk_train_params;

/* fills head-appropriate defaults (epochs/learning rate differ per head) */
void ssk_train_params_defaults(ssk_train_params* params, int head);

/* Trains one model and saves it to checkpoint_path. If holdout_fold >= 0 the
 * fold is excluded from training and *metric receives accuracy %% (skill) or
 * RMSE in newtons (force); otherwise *metric is NaN. metric may be NULL. */
ssk_status ssk_train_single(const ssk_dataset* dataset, const ssk_train_params* params,
                            const char* checkpoint_path, double* metric);

/* evaluate an existing model on one subject (skill = -1 pools all skills and
 * requires a skill model; a force model requires a specific skill) */
ssk_status ssk_evaluate(const ssk_model* model, const ssk_dataset* dataset, int subject, int skill,
                        double* metric);

/* ---- cross-validation ---- */

typedef struct ssk_cv_params {
  int channels[5];
  int dense_units;
  double dropout;
  int with_bias;
  int folds;
  int iterations;
  int fold_mode;
  int run_skill;
  int run_force;
  int skill_epochs;
  double skill_learning_rate;
  int skill_batch_size;
  int force_epochs;
  double force_learning_rate;
  int force_batch_size;
  uint64_t seed;
} ssk_cv_params;

void ssk_cv_params_defaults(ssk_cv_params* params);

typedef struct ssk_cv_summary {
  int skill_runs;
  int force_runs;
  double skill_accuracy_mean;  /* percent */
  double skill_accuracy_sd;
  double force_rmse_mean;      /* newtons */
  double force_rmse_sd;
} ssk_cv_summary;

typedef void (*ssk_cv_progress_fn)(const char* run_id, double metric, void* user);

/* Runs the full per-subject protocol and writes ledger.csv (deterministic for
 * a given dataset + params), timing.csv, and summary.txt under out_dir. */
ssk_status ssk_cross_validate(const ssk_dataset* dataset, const ssk_cv_params* params,
                              const char* out_dir, ssk_cv_progress_fn progress, void* user,
                              ssk_cv_summary* summary);

/* ---- interpretability ---- */

#define SSK_SALIENCY_NONE 0
#define SSK_SALIENCY_GUIDED 1
#define SSK_SALIENCY_GUIDED_PRODUCT 2

/* Writes <out_prefix>_overlay.ppm and <out_prefix>_heat.npy for the given
 * frame. output_index: class whose logit is explained (-1 = predicted class);
 * must be 0 or -1 for force models. layer_weights: 5 floats or NULL for the
 * default deep-heavy profile. saliency_rule additionally writes
 * <out_prefix>_saliency.{npy,ppm} using guided backpropagation. */
ssk_status ssk_gradcam_run(const ssk_model* model, const ssk_dataset* dataset, int subject,
                           int skill, int frame, int output_index, const float* layer_weights,
                           int saliency_rule, const char* out_prefix);

/* ---- streaming replay ---- */

typedef struct ssk_stream_stats {
  int emitted;
  int processed;
  int displaced;        /* overwritten in the depth-1 queue before pickup */
  int deadline_misses;  /* processed but later than one frame period */
  double period_ms;
  double mean_skill_ms;
  double max_skill_ms;
  double mean_force_ms;
  double max_force_ms;
  double duration_s;
} ssk_stream_stats;

/* Replays subject/skill frames at rate_hz (<= 0 selects the native 6.3 Hz).
 * force_models[k] serves frames whose predicted class is k; slots may repeat
 * the same handle. csv_path may be NULL; stats may be NULL. */
ssk_status ssk_stream_run(const ssk_model* skill_model, const ssk_model* const force_models[5],
                          const ssk_dataset* dataset, int subject, int skill, double rate_hz,
                          int max_frames, const char* csv_path, ssk_stream_stats* stats);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SONOSKILL_H */
