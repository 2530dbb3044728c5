#ifndef AOCIDS_AOCIDS_H
#define AOCIDS_AOCIDS_H

/*
 * C interface to the online intrusion-detection library.
 *
 * Every function returns an aoc_status. On failure aoc_last_error() describes the
 * problem; the message is thread-local and valid until the next call on that thread.
 * Objects are opaque handles released with the matching *_free function (NULL is a no-op).
 * Strings returned through char** out-parameters are released with aoc_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(AOCIDS_BUILDING_LIBRARY)
#    define AOCIDS_API __declspec(dllexport)
#  else
#    define AOCIDS_API __declspec(dllimport)
#  endif
#else
#  define AOCIDS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aoc_status {
  AOC_OK = 0,
  AOC_ERR_INVALID_ARGUMENT = 1,
  AOC_ERR_IO = 2,
  AOC_ERR_PARSE = 3,
  AOC_ERR_SHAPE = 4,
  AOC_ERR_STATE = 5,
  AOC_ERR_INTERNAL = 6,
  AOC_ERR_NULL_POINTER = 7
} aoc_status;

typedef struct aoc_config aoc_config;
typedef struct aoc_dataset aoc_dataset;
typedef struct aoc_model aoc_model;
typedef struct aoc_stream_result aoc_stream_result;
typedef struct aoc_plan aoc_plan;
typedef struct aoc_ablation aoc_ablation;

/* Percentages; the undefined flags are set when a denominator is zero. */
typedef struct aoc_metrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
  int precision_undefined;
  int recall_undefined;
  uint64_t tp;
  uint64_t tn;
  uint64_t fp;
  uint64_t fn;
} aoc_metrics;

typedef struct aoc_batch_record {
  size_t batch;
  size_t batch_size;
  size_t accepted;
  size_t rejected;
  size_t flipped;
  size_t clean_pool;
  size_t pseudo_pool;
  double acceptance_rate;
  double learning_rate;
  double train_loss;
  int has_test;
  aoc_metrics test;
} aoc_batch_record;

typedef struct aoc_cell_info {
  const char* run; /* owned by the ablation handle */
  uint64_t seed;
  int ok;
  size_t param_count;
  size_t batches;
  aoc_metrics final_metrics;
} aoc_cell_info;

typedef struct aoc_boost_summary {
  size_t train_rows;
  size_t valid_rows;
  size_t test_rows;
  size_t feature_count;
  size_t warning_count;
} aoc_boost_summary;

typedef enum aoc_report_format {
  AOC_REPORT_TABLE = 0,
  AOC_REPORT_PLOTDATA = 1,
  AOC_REPORT_ALL = 2
} aoc_report_format;

typedef void (*aoc_batch_callback)(const aoc_batch_record* record, void* user);
typedef void (*aoc_cell_callback)(const aoc_cell_info* cell, void* user);

AOCIDS_API const char* aoc_version(void);
AOCIDS_API const char* aoc_last_error(void);
AOCIDS_API const char* aoc_status_name(aoc_status status);
AOCIDS_API void aoc_string_free(char* s);

/* ---- configuration ---- */

/* base, imp2, imp3, imp4, imp23, imp24, imp34, imp234 */
AOCIDS_API aoc_status aoc_config_preset(const char* name, aoc_config** out);
/* JSON document; keys absent from it keep the base-replication defaults (or those of its "preset"). */
AOCIDS_API aoc_status aoc_config_load(const char* path, aoc_config** out);
AOCIDS_API aoc_status aoc_config_from_json(const char* text, aoc_config** out);
/* Applies a JSON patch on top of `base`; a "preset" key in the patch is rejected. */
AOCIDS_API aoc_status aoc_config_patch(const aoc_config* base, const char* patch_json, aoc_config** out);
AOCIDS_API aoc_status aoc_config_clone(const aoc_config* cfg, aoc_config** out);
AOCIDS_API aoc_status aoc_config_to_json(const aoc_config* cfg, char** out_text);
AOCIDS_API aoc_status aoc_config_save(const aoc_config* cfg, const char* path);
AOCIDS_API aoc_status aoc_config_set_seed(aoc_config* cfg, uint64_t seed);
AOCIDS_API aoc_status aoc_config_set_name(aoc_config* cfg, const char* name);
AOCIDS_API aoc_status aoc_config_name(const aoc_config* cfg, char** out_name);
AOCIDS_API void aoc_config_free(aoc_config* cfg);

/* Parameter count of the autoencoder [input -> hidden... -> mirrored -> input]. */
AOCIDS_API aoc_status aoc_param_count(size_t input_dim, const size_t* hidden_dims, size_t n_hidden, int with_heads,
                                      size_t* out);

/* ---- data ---- */

/* Loads both CSVs, fits scaling/encoding on the training file and applies it to both.
 * The fitted preprocessing is written to `preprocessor_path` unless it is NULL. */
AOCIDS_API aoc_status aoc_data_load_pair(const char* train_csv, const char* test_csv, const char* preprocessor_path,
                                         aoc_dataset** out_train, aoc_dataset** out_test);
/* Row-major features; `labels` may be NULL for unlabelled data. */
AOCIDS_API aoc_status aoc_data_from_arrays(const double* features, const double* labels, size_t rows, size_t cols,
                                           aoc_dataset** out);
AOCIDS_API aoc_status aoc_data_synthetic(size_t n_normal, size_t n_attack, size_t dim, double separation,
                                         uint64_t seed, aoc_dataset** out);
AOCIDS_API aoc_status aoc_data_shape(const aoc_dataset* data, size_t* rows, size_t* cols);
AOCIDS_API aoc_status aoc_data_write_csv(const aoc_dataset* data, const char* path);
AOCIDS_API void aoc_data_free(aoc_dataset* data);

/* ---- initial training and inference ---- */

/* Splits off the configured initial fraction of `train` and trains on it. */
AOCIDS_API aoc_status aoc_model_train(const aoc_config* cfg, const aoc_dataset* train, aoc_model** out);
AOCIDS_API aoc_status aoc_model_save(const aoc_model* model, const char* path);
/* Gaussian decision when the checkpoint carries one, classifier heads otherwise. */
AOCIDS_API aoc_status aoc_model_load(const char* path, aoc_model** out);
AOCIDS_API aoc_status aoc_model_param_count(const aoc_model* model, size_t* out);
/* `labels` receives n values; `confidence` may be NULL. n must equal the row count. */
AOCIDS_API aoc_status aoc_model_predict(aoc_model* model, const aoc_dataset* data, int* labels, double* confidence,
                                        size_t n);
AOCIDS_API aoc_status aoc_model_evaluate(aoc_model* model, const aoc_dataset* data, aoc_metrics* out);
AOCIDS_API void aoc_model_free(aoc_model* model);

/* ---- streaming ---- */

/* max_batches = 0 streams everything. `callback` may be NULL. */
AOCIDS_API aoc_status aoc_stream_run(const aoc_config* cfg, const aoc_dataset* train, const aoc_dataset* test,
                                     size_t max_batches, aoc_batch_callback callback, void* user,
                                     aoc_stream_result** out);
AOCIDS_API aoc_status aoc_stream_param_count(const aoc_stream_result* r, size_t* out);
AOCIDS_API aoc_status aoc_stream_initial_size(const aoc_stream_result* r, size_t* out);
AOCIDS_API aoc_status aoc_stream_initial_metrics(const aoc_stream_result* r, aoc_metrics* out);
AOCIDS_API aoc_status aoc_stream_final_metrics(const aoc_stream_result* r, aoc_metrics* out);
AOCIDS_API aoc_status aoc_stream_batch_count(const aoc_stream_result* r, size_t* out);
AOCIDS_API aoc_status aoc_stream_batch(const aoc_stream_result* r, size_t index, aoc_batch_record* out);
AOCIDS_API aoc_status aoc_stream_history_jsonl(const aoc_stream_result* r, char** out_text);
AOCIDS_API aoc_status aoc_stream_write_history(const aoc_stream_result* r, const char* path);
/* Wraps a single run as one-cell ablation results (for reporting). */
AOCIDS_API aoc_status aoc_stream_to_ablation(const aoc_stream_result* r, aoc_ablation** out);
AOCIDS_API void aoc_stream_free(aoc_stream_result* r);

/* ---- ablation ---- */

AOCIDS_API aoc_status aoc_plan_create(aoc_plan** out);
/* The standard seven runs with seeds 0..4. */
AOCIDS_API aoc_status aoc_plan_standard(aoc_plan** out);
AOCIDS_API aoc_status aoc_plan_add_run(aoc_plan* plan, const aoc_config* cfg);
AOCIDS_API aoc_status aoc_plan_set_seeds(aoc_plan* plan, const uint64_t* seeds, size_t n);
AOCIDS_API aoc_status aoc_plan_set_max_batches(aoc_plan* plan, size_t max_batches);
AOCIDS_API void aoc_plan_free(aoc_plan* plan);

AOCIDS_API aoc_status aoc_ablation_run(const aoc_plan* plan, const aoc_dataset* train, const aoc_dataset* test,
                                       unsigned threads, aoc_cell_callback callback, void* user,
                                       aoc_ablation** out);
AOCIDS_API aoc_status aoc_ablation_load(const char* path, aoc_ablation** out);
AOCIDS_API aoc_status aoc_ablation_save(const aoc_ablation* a, const char* path);
AOCIDS_API aoc_status aoc_ablation_cell_count(const aoc_ablation* a, size_t* out);
AOCIDS_API aoc_status aoc_ablation_cell(const aoc_ablation* a, size_t index, aoc_cell_info* out);
AOCIDS_API aoc_status aoc_ablation_render_table(const aoc_ablation* a, char** out_text);
AOCIDS_API aoc_status aoc_ablation_emit_report(const aoc_ablation* a, const char* out_dir, aoc_report_format format);
AOCIDS_API void aoc_ablation_free(aoc_ablation* a);

/* ---- gradient-boosting export ---- */

AOCIDS_API aoc_status aoc_export_boost(const char* train_csv, const char* test_csv, const char* out_dir, uint64_t seed,
                                       double valid_fraction, aoc_boost_summary* out);

#ifdef __cplusplus
}
#endif

#endif /* AOCIDS_AOCIDS_H */
