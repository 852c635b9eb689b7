/* Copyright (c) 2026, The chartground Authors
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef CHARTGROUND_H_
#define CHARTGROUND_H_

#include <stddef.h>
#include <stdint.h>

#if defined(CHARTGROUND_BUILDING_LIBRARY)
#define CG_API __attribute__((visibility("default")))
#else
#define CG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values 1..25 mirror chartground::ErrorCode. */
typedef enum cg_status {
  CG_OK = 0,
  CG_ERR_INVALID_ARGUMENT = 1,
  CG_ERR_IO = 2,
  CG_ERR_MALFORMED_JSON = 3,
  CG_ERR_SCHEMA_VIOLATION = 4,
  CG_ERR_BOX_OUT_OF_BOUNDS = 5,
  CG_ERR_INVALID_BOX = 6,
  CG_ERR_EMPTY_GROUND_TRUTH = 7,
  CG_ERR_UNKNOWN_CATEGORY = 8,
  CG_ERR_EMPTY_SCRIPT = 9,
  CG_ERR_NO_PARSEABLE_CONTENT = 10,
  CG_ERR_NO_ANSWER_BLOCK = 11,
  CG_ERR_UNPARSEABLE_BOX = 12,
  CG_ERR_JUDGE_PARSE = 13,
  CG_ERR_GROUP_TOO_SMALL = 14,
  CG_ERR_DUPLICATE_QUESTION_ID = 15,
  CG_ERR_EMPTY_BENCHMARK = 16,
  CG_ERR_PROVIDER = 17,
  CG_ERR_REPLAY_MISS = 18,
  CG_ERR_TIMEOUT = 19,
  CG_ERR_NO_CODE_BLOCK = 20,
  CG_ERR_EVOLUTION_FAILED = 21,
  CG_ERR_VERDICT_MISALIGNED = 22,
  CG_ERR_INSUFFICIENT_RECORDS = 23,
  CG_ERR_RENDER_FAILED = 24,
  CG_ERR_CANCELLED = 25,
  CG_ERR_INTERNAL = 100
} cg_status;

typedef enum cg_task { CG_TASK_QA = 0, CG_TASK_GROUNDING = 1, CG_TASK_CHART_TO_CODE = 2 } cg_task;

typedef struct cg_box {
  double x_min, y_min, x_max, y_max;
} cg_box;

typedef struct cg_context cg_context;
typedef struct cg_element_map cg_element_map;

/* Library */
CG_API const char* cg_version(void);
CG_API const char* cg_status_name(cg_status status);
/* Message of the last failing call on this thread; never NULL. */
CG_API const char* cg_last_error(void);
/* Frees strings returned through char** out-parameters. */
CG_API void cg_string_free(char* s);

/* Context: run configuration shared by the file-level operations.
 * Option keys: mode (live|replay|stub), cache_dir, model, seed, workers,
 * bridge (path to bridge executable, or "stub"), render_timeout,
 * per_category, probe_attempts, rl_size, weight_mode (one_minus_p|p),
 * template_set, accuracy_weight, accuracy_weight.<task>, iou_as_reward,
 * group_std_epsilon, judge_errors (zero|fail), max_in_flight, assets_dir.
 * Credentials are read from the environment only. */
CG_API cg_status cg_context_create(cg_context** out);
CG_API void cg_context_destroy(cg_context* ctx);
CG_API cg_status cg_context_set_option(cg_context* ctx, const char* key, const char* value);
/* Requests cancellation of a running build. Async-signal-safe. */
CG_API void cg_context_cancel(cg_context* ctx);

/* Scalar primitives */
CG_API cg_status cg_iou(const cg_box* a, const cg_box* b, double* out);
CG_API cg_status cg_match_recall(const cg_box* preds, size_t n_preds, const cg_box* gts, size_t n_gts,
                                 double threshold, size_t* matched, double* recall);
CG_API cg_status cg_final_reward(double accuracy, int format, cg_task task, const cg_context* ctx,
                                 double* out);
CG_API cg_status cg_group_advantages(const double* rewards, size_t n, const cg_context* ctx,
                                     double* out);
CG_API cg_status cg_format_reward(cg_task task, const char* response, int* out);
CG_API cg_status cg_code_reward(const char* judge_text, const cg_context* ctx, double* out);
CG_API cg_status cg_answer_accuracy(const char* pred, const char* gt, int* out);

/* Element location maps */
CG_API cg_status cg_element_map_parse(const char* json, cg_element_map** out);
CG_API void cg_element_map_destroy(cg_element_map* map);
CG_API size_t cg_element_map_subplot_count(const cg_element_map* map);
CG_API size_t cg_element_map_box_count(const cg_element_map* map);
CG_API cg_status cg_element_map_serialize(const cg_element_map* map, char** out);
/* JSON array of {subplot_index, category, group, text, bbox}. */
CG_API cg_status cg_element_map_sample(const cg_element_map* map, int per_category, uint64_t seed,
                                       char** out);

/* File-level operations. Report strings are JSON; free with cg_string_free. */
CG_API cg_status cg_evaluate_files(const cg_context* ctx, const char* benchmark_path,
                                   const char* predictions_path, double threshold,
                                   const char* manifest_path, int as_table, char** report,
                                   char** warnings_json);
CG_API cg_status cg_score_rollouts(cg_context* ctx, const char* in_path, const char* out_path,
                                   char** summary_json);
CG_API cg_status cg_build_dataset(cg_context* ctx, const char* input_dir, const char* output_dir,
                                  char** summary_json);
CG_API cg_status cg_render_script(cg_context* ctx, const char* script_path, const char* out_dir,
                                  int emit_locations, char** result_json);
CG_API cg_status cg_dataset_stats(const char* jsonl_path, int as_table, char** out);

#ifdef __cplusplus
}
#endif

#endif /* CHARTGROUND_H_ */
