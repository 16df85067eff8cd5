// Copyright 2026 The ptsort Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PTSORT_PTSORT_H_
#define PTSORT_PTSORT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(PTSORT_BUILDING_LIBRARY)
#define PTSORT_API __declspec(dllexport)
#else
#define PTSORT_API __declspec(dllimport)
#endif
#else
#define PTSORT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as the command-line exit codes. */
typedef enum ptsort_status {
  PTSORT_OK = 0,
  PTSORT_INVALID_ARGUMENT = 1,
  PTSORT_CONFIG_ERROR = 2,
  PTSORT_NUMERIC_ERROR = 3,
  PTSORT_VERIFICATION_FAILED = 4,
  PTSORT_IO_ERROR = 5,
  PTSORT_INTERNAL_ERROR = 6
} ptsort_status;

typedef struct ptsort_config ptsort_config;
typedef struct ptsort_clouds ptsort_clouds;
typedef struct ptsort_sorter ptsort_sorter;
typedef struct ptsort_model ptsort_model;
typedef struct ptsort_history ptsort_history;
typedef struct ptsort_report ptsort_report;

PTSORT_API const char* ptsort_version(void);

/* Message of the last failed call on this thread; "" after a success. */
PTSORT_API const char* ptsort_last_error(void);

/*
 * String results use a caller buffer. `*length` always receives the full
 * length without the terminator. A NULL buffer only queries the length; a
 * buffer shorter than length + 1 fails with PTSORT_INVALID_ARGUMENT.
 */

/* ---- configuration ---- */
PTSORT_API ptsort_status ptsort_config_create(ptsort_config** out);
PTSORT_API ptsort_status ptsort_config_load(const char* path, ptsort_config** out);
/* Same key syntax as the config file, e.g. ("sorter.k", "24"). */
PTSORT_API ptsort_status ptsort_config_set(ptsort_config* config, const char* key,
                                           const char* value);
PTSORT_API ptsort_status ptsort_config_get(const ptsort_config* config, const char* key,
                                           char* buffer, size_t capacity, size_t* length);
/* Fully expanded, documented config text (parses back to the same values). */
PTSORT_API ptsort_status ptsort_config_render(const ptsort_config* config, char* buffer,
                                              size_t capacity, size_t* length);
PTSORT_API void ptsort_config_destroy(ptsort_config* config);

/* ---- point clouds ---- */
/* Scenes first .. first+count-1 of the configured generator stream. Indices
 * below scene.count are training scenes, the next scene.held_out are held
 * out. */
PTSORT_API ptsort_status ptsort_clouds_generate(const ptsort_config* config, size_t first,
                                                size_t count, ptsort_clouds** out);
PTSORT_API ptsort_status ptsort_clouds_load(const char* const* paths, size_t count,
                                            ptsort_clouds** out);
PTSORT_API ptsort_status ptsort_clouds_save(const ptsort_clouds* clouds, size_t index,
                                            const char* path);
PTSORT_API size_t ptsort_clouds_count(const ptsort_clouds* clouds);
PTSORT_API ptsort_status ptsort_clouds_point_count(const ptsort_clouds* clouds, size_t index,
                                                   size_t* points);
PTSORT_API void ptsort_clouds_destroy(ptsort_clouds* clouds);

/* ---- sorter ---- */
PTSORT_API ptsort_status ptsort_sorter_train(const ptsort_config* config,
                                             const ptsort_clouds* clouds, ptsort_sorter** out,
                                             ptsort_history** history);
PTSORT_API ptsort_status ptsort_sorter_load(const char* path, ptsort_sorter** out);
PTSORT_API ptsort_status ptsort_sorter_save(const ptsort_sorter* sorter, const char* path);
/* Eval-mode scores of one cloud; `scores` must hold the cloud's point count. */
PTSORT_API ptsort_status ptsort_sorter_scores(const ptsort_sorter* sorter,
                                              const ptsort_clouds* clouds, size_t index,
                                              double* scores, size_t capacity);
PTSORT_API void ptsort_sorter_destroy(ptsort_sorter* sorter);

/* ---- segmentation model ---- */
/* When checkpoint_path is non-NULL and train.checkpoint_every > 0 the model
 * is also written there every that many epochs. */
PTSORT_API ptsort_status ptsort_model_train(const ptsort_config* config,
                                            const ptsort_clouds* clouds,
                                            const char* checkpoint_path, ptsort_model** out,
                                            ptsort_history** history);
PTSORT_API ptsort_status ptsort_model_load(const char* path, ptsort_model** out);
PTSORT_API ptsort_status ptsort_model_save(const ptsort_model* model, const char* path);
/* order may be NULL or "" to use the model's own serialization. */
PTSORT_API ptsort_status ptsort_model_evaluate(const ptsort_model* model,
                                               const ptsort_clouds* clouds, const char* order,
                                               size_t metric_k, ptsort_report** out);
PTSORT_API void ptsort_model_destroy(ptsort_model* model);

/* ---- training history ---- */
PTSORT_API size_t ptsort_history_epochs(const ptsort_history* history);
/* One JSON object per line. */
PTSORT_API ptsort_status ptsort_history_write(const ptsort_history* history, const char* path);
PTSORT_API void ptsort_history_destroy(ptsort_history* history);

/* ---- reports ---- */
/* Locality table over compare.methods; sorter may be NULL, which leaves the
 * learned row marked unavailable. */
PTSORT_API ptsort_status ptsort_compare_orders(const ptsort_config* config,
                                               const ptsort_clouds* clouds,
                                               const ptsort_sorter* sorter,
                                               ptsort_report** out);
PTSORT_API ptsort_status ptsort_ablate_k(const ptsort_config* config,
                                         const ptsort_clouds* train_clouds,
                                         const ptsort_clouds* eval_clouds, ptsort_report** out);
/* Returns PTSORT_VERIFICATION_FAILED (with the report still set) when any
 * gradient check exceeds its tolerance. */
PTSORT_API ptsort_status ptsort_grad_check(const ptsort_config* config, ptsort_report** out);

PTSORT_API ptsort_status ptsort_report_json(const ptsort_report* report, char* buffer,
                                            size_t capacity, size_t* length);
PTSORT_API ptsort_status ptsort_report_text(const ptsort_report* report, char* buffer,
                                            size_t capacity, size_t* length);
/* Number at an RFC 6901 JSON pointer into the report, e.g. "/metrics/mIoU". */
PTSORT_API ptsort_status ptsort_report_number(const ptsort_report* report,
                                              const char* pointer, double* value);
/* Writes <stem>.json, <stem>.txt and any CSV tables as <stem>_<table>.csv. */
PTSORT_API ptsort_status ptsort_report_write(const ptsort_report* report,
                                             const char* directory, const char* stem);
PTSORT_API void ptsort_report_destroy(ptsort_report* report);

#ifdef __cplusplus
}
#endif

#endif /* PTSORT_PTSORT_H_ */
