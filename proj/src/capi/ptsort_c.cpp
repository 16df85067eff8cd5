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

#include "ptsort/ptsort.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ptsort/error.hpp"
#include "ptsort/io.hpp"
#include "ptsort/train.hpp"
#include "ptsort/verify.hpp"

struct ptsort_config {
  ptsort::io::RunConfig value;
};

struct ptsort_clouds {
  std::vector<ptsort::geometry::PointCloud> items;
};

struct ptsort_sorter {
  ptsort::nn::MlpParams params;
};

struct ptsort_model {
  ptsort::train::TrainedModel value;
};

struct ptsort_history {
  ptsort::train::TrainHistory value;
};

struct ptsort_report {
  nlohmann::json json;
  std::string text;
  std::vector<std::pair<std::string, std::string>> tables;
};

namespace {

thread_local std::string last_error;

ptsort_status to_status(ptsort::ErrorCode code) {
  switch (code) {
    case ptsort::ErrorCode::kInvalidArgument: return PTSORT_INVALID_ARGUMENT;
    case ptsort::ErrorCode::kConfig: return PTSORT_CONFIG_ERROR;
    case ptsort::ErrorCode::kNumeric: return PTSORT_NUMERIC_ERROR;
    case ptsort::ErrorCode::kVerification: return PTSORT_VERIFICATION_FAILED;
    case ptsort::ErrorCode::kIo: return PTSORT_IO_ERROR;
  }
  return PTSORT_INTERNAL_ERROR;
}

ptsort_status fail(ptsort_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Runs `body` and maps every exception to a status plus last_error.
template <typename F>
ptsort_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const ptsort::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PTSORT_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(PTSORT_INTERNAL_ERROR, e.what());
  }
}

void require_arg(bool ok, const char* what) {
  if (!ok) throw ptsort::Error(ptsort::ErrorCode::kInvalidArgument, what);
}

ptsort_status copy_out(const std::string& text, char* buffer, size_t capacity, size_t* length) {
  require_arg(length != nullptr, "length pointer is null");
  *length = text.size();
  if (buffer == nullptr) return PTSORT_OK;
  if (capacity < text.size() + 1) {
    return fail(PTSORT_INVALID_ARGUMENT, "buffer too small: need " +
                                             std::to_string(text.size() + 1) + " bytes");
  }
  std::memcpy(buffer, text.c_str(), text.size() + 1);
  return PTSORT_OK;
}

const ptsort::geometry::PointCloud& cloud_at(const ptsort_clouds* clouds, size_t index) {
  require_arg(clouds != nullptr, "clouds handle is null");
  require_arg(index < clouds->items.size(), "cloud index out of range");
  return clouds->items[index];
}

ptsort_report* labeled_report(const ptsort::train::Evaluation& ev, const std::string& method) {
  auto* r = new ptsort_report;
  r->json = {{"metrics", ptsort::metrics::to_json(ev.metrics)},
             {"locality", ptsort::metrics::to_json(ev.locality)}};
  const std::vector<ptsort::metrics::LabeledReport> rows{{method, ev.metrics}};
  r->text = ptsort::metrics::render_text(rows) + "\n" + ptsort::metrics::render_text(ev.locality);
  r->tables = {{"iou", ptsort::metrics::render_iou_csv(rows)},
               {"acc", ptsort::metrics::render_acc_csv(rows)},
               {"locality", ptsort::metrics::render_csv(ev.locality)}};
  return r;
}

}  // namespace

extern "C" {

const char* ptsort_version(void) { return "1.0.0"; }

const char* ptsort_last_error(void) { return last_error.c_str(); }

ptsort_status ptsort_config_create(ptsort_config** out) {
  return guarded([&] {
    require_arg(out != nullptr, "output pointer is null");
    *out = new ptsort_config;
    return PTSORT_OK;
  });
}

ptsort_status ptsort_config_load(const char* path, ptsort_config** out) {
  return guarded([&] {
    require_arg(path != nullptr && out != nullptr, "null argument");
    auto config = ptsort::io::parse_config(path);
    *out = new ptsort_config{std::move(config)};
    return PTSORT_OK;
  });
}

ptsort_status ptsort_config_set(ptsort_config* config, const char* key, const char* value) {
  return guarded([&] {
    require_arg(config != nullptr && key != nullptr && value != nullptr, "null argument");
    ptsort::io::set_config_value(config->value, key, value);
    return PTSORT_OK;
  });
}

ptsort_status ptsort_config_get(const ptsort_config* config, const char* key, char* buffer,
                                size_t capacity, size_t* length) {
  return guarded([&] {
    require_arg(config != nullptr && key != nullptr, "null argument");
    return copy_out(ptsort::io::get_config_value(config->value, key), buffer, capacity, length);
  });
}

ptsort_status ptsort_config_render(const ptsort_config* config, char* buffer, size_t capacity,
                                   size_t* length) {
  return guarded([&] {
    require_arg(config != nullptr, "config handle is null");
    return copy_out(ptsort::io::render_config(config->value), buffer, capacity, length);
  });
}

void ptsort_config_destroy(ptsort_config* config) { delete config; }

ptsort_status ptsort_clouds_generate(const ptsort_config* config, size_t first, size_t count,
                                     ptsort_clouds** out) {
  return guarded([&] {
    require_arg(config != nullptr && out != nullptr, "null argument");
    require_arg(count > 0, "scene count must be positive");
    auto scenes = ptsort::io::generate_scenes(config->value, first, count);
    *out = new ptsort_clouds{std::move(scenes)};
    return PTSORT_OK;
  });
}

ptsort_status ptsort_clouds_load(const char* const* paths, size_t count, ptsort_clouds** out) {
  return guarded([&] {
    require_arg(paths != nullptr && out != nullptr, "null argument");
    require_arg(count > 0, "no cloud files given");
    auto clouds = std::make_unique<ptsort_clouds>();
    for (size_t i = 0; i < count; ++i) {
      require_arg(paths[i] != nullptr, "null cloud path");
      clouds->items.push_back(ptsort::io::read_cloud(std::filesystem::path(paths[i])));
    }
    *out = clouds.release();
    return PTSORT_OK;
  });
}

ptsort_status ptsort_clouds_save(const ptsort_clouds* clouds, size_t index, const char* path) {
  return guarded([&] {
    require_arg(path != nullptr, "path is null");
    ptsort::io::write_cloud(cloud_at(clouds, index), std::filesystem::path(path));
    return PTSORT_OK;
  });
}

size_t ptsort_clouds_count(const ptsort_clouds* clouds) {
  return clouds == nullptr ? 0 : clouds->items.size();
}

ptsort_status ptsort_clouds_point_count(const ptsort_clouds* clouds, size_t index,
                                        size_t* points) {
  return guarded([&] {
    require_arg(points != nullptr, "output pointer is null");
    *points = cloud_at(clouds, index).size();
    return PTSORT_OK;
  });
}

void ptsort_clouds_destroy(ptsort_clouds* clouds) { delete clouds; }

ptsort_status ptsort_sorter_train(const ptsort_config* config, const ptsort_clouds* clouds,
                                  ptsort_sorter** out, ptsort_history** history) {
  return guarded([&] {
    require_arg(config != nullptr && clouds != nullptr && out != nullptr, "null argument");
    auto result = ptsort::train::train_sorter(clouds->items, config->value.train);
    *out = new ptsort_sorter{std::move(result.sorter)};
    if (history != nullptr) *history = new ptsort_history{std::move(result.history)};
    return PTSORT_OK;
  });
}

ptsort_status ptsort_sorter_load(const char* path, ptsort_sorter** out) {
  return guarded([&] {
    require_arg(path != nullptr && out != nullptr, "null argument");
    *out = new ptsort_sorter{ptsort::io::load_sorter(path)};
    return PTSORT_OK;
  });
}

ptsort_status ptsort_sorter_save(const ptsort_sorter* sorter, const char* path) {
  return guarded([&] {
    require_arg(sorter != nullptr && path != nullptr, "null argument");
    ptsort::io::save_sorter(sorter->params, path);
    return PTSORT_OK;
  });
}

ptsort_status ptsort_sorter_scores(const ptsort_sorter* sorter, const ptsort_clouds* clouds,
                                   size_t index, double* scores, size_t capacity) {
  return guarded([&] {
    require_arg(sorter != nullptr && scores != nullptr, "null argument");
    const auto& cloud = cloud_at(clouds, index);
    require_arg(capacity >= cloud.size(), "score buffer smaller than the cloud");
    const auto values = ptsort::sorter::infer_scores(sorter->params, cloud);
    std::copy(values.begin(), values.end(), scores);
    return PTSORT_OK;
  });
}

void ptsort_sorter_destroy(ptsort_sorter* sorter) { delete sorter; }

ptsort_status ptsort_model_train(const ptsort_config* config, const ptsort_clouds* clouds,
                                 const char* checkpoint_path, ptsort_model** out,
                                 ptsort_history** history) {
  return guarded([&] {
    require_arg(config != nullptr && clouds != nullptr && out != nullptr, "null argument");
    ptsort::train::CheckpointHook hook;
    if (checkpoint_path != nullptr && config->value.checkpoint_every > 0) {
      const std::string path = checkpoint_path;
      hook = [path](std::size_t, const ptsort::train::TrainedModel& model) {
        ptsort::io::save_model(model, path);
      };
    }
    auto result = ptsort::train::train_joint(clouds->items, config->value.train, hook,
                                             config->value.checkpoint_every);
    *out = new ptsort_model{std::move(result.model)};
    if (history != nullptr) *history = new ptsort_history{std::move(result.history)};
    return PTSORT_OK;
  });
}

ptsort_status ptsort_model_load(const char* path, ptsort_model** out) {
  return guarded([&] {
    require_arg(path != nullptr && out != nullptr, "null argument");
    *out = new ptsort_model{ptsort::io::load_model(path)};
    return PTSORT_OK;
  });
}

ptsort_status ptsort_model_save(const ptsort_model* model, const char* path) {
  return guarded([&] {
    require_arg(model != nullptr && path != nullptr, "null argument");
    ptsort::io::save_model(model->value, path);
    return PTSORT_OK;
  });
}

ptsort_status ptsort_model_evaluate(const ptsort_model* model, const ptsort_clouds* clouds,
                                    const char* order, size_t metric_k, ptsort_report** out) {
  return guarded([&] {
    require_arg(model != nullptr && clouds != nullptr && out != nullptr, "null argument");
    require_arg(metric_k >= 1, "metric_k must be at least 1");
    const std::string method = order == nullptr ? "" : order;
    if (!method.empty() && method != ptsort::train::kLearned) {
      ptsort::curves::parse_variant(method);
    }
    const auto ev = ptsort::train::evaluate(model->value, clouds->items, metric_k, method);
    *out = labeled_report(ev, method.empty() ? model->value.serialization : method);
    return PTSORT_OK;
  });
}

void ptsort_model_destroy(ptsort_model* model) { delete model; }

size_t ptsort_history_epochs(const ptsort_history* history) {
  return history == nullptr ? 0 : history->value.epochs.size();
}

ptsort_status ptsort_history_write(const ptsort_history* history, const char* path) {
  return guarded([&] {
    require_arg(history != nullptr && path != nullptr, "null argument");
    ptsort::io::write_text(path, history->value.to_jsonl());
    return PTSORT_OK;
  });
}

void ptsort_history_destroy(ptsort_history* history) { delete history; }

ptsort_status ptsort_compare_orders(const ptsort_config* config, const ptsort_clouds* clouds,
                                    const ptsort_sorter* sorter, ptsort_report** out) {
  return guarded([&] {
    require_arg(config != nullptr && clouds != nullptr && out != nullptr, "null argument");
    const auto& c = config->value;
    const auto report = ptsort::train::compare_orders(
        clouds->items, sorter == nullptr ? nullptr : &sorter->params, c.compare_methods,
        c.compare_k, c.train.backbone.window_size, c.train.bits_per_axis);
    auto* r = new ptsort_report;
    r->json = ptsort::metrics::to_json(report);
    r->text = ptsort::metrics::render_text(report);
    r->tables = {{"locality", ptsort::metrics::render_csv(report)}};
    *out = r;
    return PTSORT_OK;
  });
}

ptsort_status ptsort_ablate_k(const ptsort_config* config, const ptsort_clouds* train_clouds,
                              const ptsort_clouds* eval_clouds, ptsort_report** out) {
  return guarded([&] {
    require_arg(config != nullptr && train_clouds != nullptr && out != nullptr, "null argument");
    static const std::vector<ptsort::geometry::PointCloud> kNone;
    const auto table = ptsort::train::ablation_sweep(
        config->value.train, train_clouds->items,
        eval_clouds == nullptr ? kNone : eval_clouds->items, config->value.ablation_k);
    auto* r = new ptsort_report;
    r->json = table.to_json();
    r->text = table.to_text();
    r->tables = {{"iou", table.iou_csv()}, {"acc", table.acc_csv()}};
    *out = r;
    return PTSORT_OK;
  });
}

ptsort_status ptsort_grad_check(const ptsort_config* config, ptsort_report** out) {
  return guarded([&] {
    require_arg(config != nullptr && out != nullptr, "null argument");
    const auto suite = ptsort::verify::run_grad_suite(config->value.grad_check_seeds,
                                                      config->value.train.seed);
    auto* r = new ptsort_report;
    r->json = suite.to_json();
    r->text = suite.to_text();
    *out = r;
    if (!suite.passed()) {
      return fail(PTSORT_VERIFICATION_FAILED, "gradient check exceeded tolerance");
    }
    return PTSORT_OK;
  });
}

ptsort_status ptsort_report_json(const ptsort_report* report, char* buffer, size_t capacity,
                                 size_t* length) {
  return guarded([&] {
    require_arg(report != nullptr, "report handle is null");
    return copy_out(report->json.dump(2) + "\n", buffer, capacity, length);
  });
}

ptsort_status ptsort_report_text(const ptsort_report* report, char* buffer, size_t capacity,
                                 size_t* length) {
  return guarded([&] {
    require_arg(report != nullptr, "report handle is null");
    return copy_out(report->text, buffer, capacity, length);
  });
}

ptsort_status ptsort_report_number(const ptsort_report* report, const char* pointer,
                                   double* value) {
  return guarded([&] {
    require_arg(report != nullptr && pointer != nullptr && value != nullptr, "null argument");
    try {
      const auto& node = report->json.at(nlohmann::json::json_pointer(pointer));
      require_arg(node.is_number(), "report value is not a number");
      *value = node.get<double>();
    } catch (const nlohmann::json::exception& e) {
      return fail(PTSORT_INVALID_ARGUMENT, std::string("bad report pointer: ") + e.what());
    }
    return PTSORT_OK;
  });
}

ptsort_status ptsort_report_write(const ptsort_report* report, const char* directory,
                                  const char* stem) {
  return guarded([&] {
    require_arg(report != nullptr && directory != nullptr && stem != nullptr, "null argument");
    const std::filesystem::path dir(directory);
    const std::string base(stem);
    ptsort::io::write_text(dir / (base + ".json"), report->json.dump(2) + "\n");
    ptsort::io::write_text(dir / (base + ".txt"), report->text);
    for (const auto& [name, csv] : report->tables) {
      ptsort::io::write_text(dir / (base + "_" + name + ".csv"), csv);
    }
    return PTSORT_OK;
  });
}

void ptsort_report_destroy(ptsort_report* report) { delete report; }

}  // extern "C"
