/*
 * masklab C API: action-wise saliency masks for vision policies, with
 * perturbation baselines and an evaluation suite (fidelity, insertion/
 * deletion AUC, counterfactuals).
 *
 * All objects are opaque handles created by ml_*_create/load functions and
 * released with the matching ml_*_destroy. Functions return ML_OK (0) on
 * success or a nonzero status; ml_last_error() describes the most recent
 * failure on the calling thread.
 */
#ifndef MASKLAB_MASKLAB_H
#define MASKLAB_MASKLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef int ml_status;
#define ML_OK 0
#define ML_ERR_INVALID 1   /* bad arguments, shapes, or configuration */
#define ML_ERR_IO 2        /* file system failures, refusing to overwrite */
#define ML_ERR_NUMERIC 3   /* non-finite loss (training abort) */
#define ML_ERR_NOT_FOUND 4 /* missing checkpoint/dataset */
#define ML_ERR_TRAINING 5  /* expert policy failed its agreement floor */
#define ML_ERR_INTERNAL 6

const char* ml_last_error(void);

/* Caps worker threads globally; 0 restores the hardware default. */
void ml_set_threads(int n);

typedef struct ml_env ml_env;
typedef struct ml_policy ml_policy;
typedef struct ml_dataset ml_dataset;
typedef struct ml_explainer ml_explainer;

/* ---- environment ---- */

typedef struct ml_env_config {
    int width;
    int height;
    int num_actions;
    int num_beacons;
    int beacon_size;
} ml_env_config;

void ml_env_config_init(ml_env_config* config); /* fills defaults (28x28, K=4) */
ml_status ml_env_create_beacon(const ml_env_config* config, ml_env** out);
void ml_env_destroy(ml_env* env);

/* ---- expert policies ---- */

ml_status ml_policy_create_analytic(const ml_env* env, ml_policy** out);

typedef struct ml_tiny_train_config {
    int max_epochs;
    uint64_t seed;
} ml_tiny_train_config;

void ml_tiny_train_config_init(ml_tiny_train_config* config);
/* Behavioral-cloning fit against the dataset's expert actions; frozen on
 * return. Fails with ML_ERR_TRAINING below 80% validation agreement. */
ml_status ml_policy_train_tiny(const ml_dataset* dataset, const ml_tiny_train_config* config,
                               ml_policy** out);

ml_status ml_policy_save(const ml_policy* policy, const char* path);
ml_status ml_policy_load(const char* path, ml_policy** out);
int ml_policy_num_actions(const ml_policy* policy);
void ml_policy_destroy(ml_policy* policy);

/* ---- datasets ---- */

ml_status ml_dataset_collect(const ml_env* env, const ml_policy* policy, int n, uint64_t seed,
                             ml_dataset** out);
/* Refuses to overwrite an existing dataset unless force is nonzero. */
ml_status ml_dataset_save(const ml_dataset* dataset, const char* dir, int force);
ml_status ml_dataset_load(const char* dir, ml_dataset** out);

typedef struct ml_dataset_info {
    int count;
    int num_actions;
    int width;
    int height;
    int n_train;
    int n_valid;
    int n_test;
    uint64_t seed;
} ml_dataset_info;

ml_status ml_dataset_stats(const ml_dataset* dataset, ml_dataset_info* out);
/* The environment and expert policy recorded in the dataset manifest. The
 * expert of a loaded tiny-cnn dataset is read from its directory. */
ml_status ml_dataset_env(const ml_dataset* dataset, ml_env** out);
ml_status ml_dataset_expert_policy(const ml_dataset* dataset, ml_policy** out);
void ml_dataset_destroy(ml_dataset* dataset);

/* ---- explainer ---- */

ml_status ml_explainer_create(int num_actions, int height, int width, int channels, uint64_t seed,
                              ml_explainer** out);
ml_status ml_explainer_load(const char* path, ml_explainer** out);
ml_status ml_explainer_save(const ml_explainer* explainer, const char* path, int epoch);
void ml_explainer_destroy(ml_explainer* explainer);

/* state: H*W floats in [0,1] (row-major); out: K*H*W floats. */
ml_status ml_explainer_masks(const ml_explainer* explainer, const float* state, size_t state_len,
                             float* out, size_t out_len);

/* ---- training ---- */

typedef struct ml_train_config {
    float learning_rate; /* default 1e-5 */
    int batch_size;      /* default 16 */
    int epochs;          /* default 50 */
    uint64_t seed;       /* default 42 */
    float lambda_e;      /* default 1.0 */
    float lambda_avg;    /* default 0.3 */
    float lambda_smooth; /* default 1.0 */
    float lambda_l2;     /* default 0.01 */
} ml_train_config;

void ml_train_config_init(ml_train_config* config);
/* Trains in place; writes the per-epoch CSV log and the best-validation
 * checkpoint when paths are given (either may be NULL). */
ml_status ml_train(ml_explainer* explainer, const ml_policy* policy, const ml_dataset* dataset,
                   const ml_train_config* config, const char* log_csv, const char* checkpoint_out,
                   float* best_valid_loss);

/* ---- evaluation ---- */

typedef struct ml_eval_config {
    const double* fractions; /* NULL -> {0.25, 0.5, 1.0} */
    int n_fractions;
    int per_pixel_steps; /* exact per-pixel curves instead of ceil(N/100) chunks */
    int with_baselines;  /* also run rise/blur/occlusion/normalized-delta */
    int n_overlays;
    int overlay_scale;
    int cf_examples;
    int cf_regions;
    float cf_threshold;
    int rise_masks;
    int rise_cell;
    float rise_p_keep;
    uint64_t rise_seed;
    int blur_stride;
    float blur_sigma;
    int occlusion_patch;
    const char* const* echo_keys; /* resolved caller config echoed into report.json */
    const char* const* echo_values;
    int n_echo;
} ml_eval_config;

void ml_eval_config_init(ml_eval_config* config);
/* Writes report.json, tables.csv and overlays/ under out_dir. */
ml_status ml_evaluate(const ml_explainer* const* checkpoints, const char* const* names,
                      int n_checkpoints, const ml_policy* policy, const ml_dataset* dataset,
                      const ml_eval_config* config, const char* out_dir);

/* ---- explanation artifacts ---- */

/* Writes <index>_action<k>.ppm overlays for every action into out_dir. */
ml_status ml_emit_explanation(const ml_explainer* explainer, const ml_dataset* dataset, int index,
                              int scale, const char* out_dir);

/* Region-removal counterfactuals for one record, written as JSON. */
ml_status ml_counterfactual(const ml_explainer* explainer, const ml_policy* policy,
                            const ml_dataset* dataset, int index, float threshold, int top_regions,
                            const char* out_json);

#define ML_BASELINE_RISE 0
#define ML_BASELINE_BLUR 1
#define ML_BASELINE_OCCLUSION 2
#define ML_BASELINE_NORMALIZED_DELTA 3

typedef struct ml_baseline_config {
    int method;
    int rise_masks;
    int rise_cell;
    float rise_p_keep;
    uint64_t rise_seed;
    int blur_stride;
    float blur_sigma;
    int occlusion_patch;
} ml_baseline_config;

void ml_baseline_config_init(ml_baseline_config* config);
/* action < 0 uses the record's expert action. Writes <prefix>.vmt and
 * <prefix>.json. */
ml_status ml_baseline_saliency(const ml_policy* policy, const ml_dataset* dataset, int index,
                               int action, const ml_baseline_config* config, const char* prefix);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MASKLAB_MASKLAB_H */
