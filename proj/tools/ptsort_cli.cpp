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

// Command-line front end over the ptsort C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptsort/ptsort.h"

namespace fs = std::filesystem;

namespace {

struct Failure {
  ptsort_status status;
};

void check(ptsort_status status) {
  if (status != PTSORT_OK) throw Failure{status};
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using Config = std::unique_ptr<ptsort_config, Deleter<ptsort_config, ptsort_config_destroy>>;
using Clouds = std::unique_ptr<ptsort_clouds, Deleter<ptsort_clouds, ptsort_clouds_destroy>>;
using Sorter = std::unique_ptr<ptsort_sorter, Deleter<ptsort_sorter, ptsort_sorter_destroy>>;
using Model = std::unique_ptr<ptsort_model, Deleter<ptsort_model, ptsort_model_destroy>>;
using History =
    std::unique_ptr<ptsort_history, Deleter<ptsort_history, ptsort_history_destroy>>;
using Report = std::unique_ptr<ptsort_report, Deleter<ptsort_report, ptsort_report_destroy>>;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "ptsort_out";
  std::string checkpoint;
  std::optional<long long> k;
  std::string order;
  std::vector<std::string> clouds;
  std::vector<std::string> eval_clouds;
};

std::string config_get(const ptsort_config* config, const char* key) {
  size_t length = 0;
  check(ptsort_config_get(config, key, nullptr, 0, &length));
  std::string value(length, '\0');
  check(ptsort_config_get(config, key, value.data(), length + 1, &length));
  return value;
}

std::size_t config_size(const ptsort_config* config, const char* key) {
  return static_cast<std::size_t>(std::stoull(config_get(config, key)));
}

void set(ptsort_config* config, const char* key, const std::string& value) {
  check(ptsort_config_set(config, key, value.c_str()));
}

Config load_config(const Options& opt, const char* k_key) {
  ptsort_config* raw = nullptr;
  if (opt.config_path.empty()) {
    check(ptsort_config_create(&raw));
  } else {
    check(ptsort_config_load(opt.config_path.c_str(), &raw));
  }
  Config config(raw);
  if (opt.seed) set(config.get(), "seed", std::to_string(*opt.seed));
  if (opt.k && k_key != nullptr) set(config.get(), k_key, std::to_string(*opt.k));
  return config;
}

void echo_config(const ptsort_config* config, const Options& opt) {
  size_t length = 0;
  check(ptsort_config_render(config, nullptr, 0, &length));
  std::string text(length, '\0');
  check(ptsort_config_render(config, text.data(), length + 1, &length));
  std::error_code ec;
  fs::create_directories(opt.out, ec);
  FILE* f = std::fopen((fs::path(opt.out) / "config.ini").string().c_str(), "wb");
  if (f == nullptr) {
    std::cerr << "error: cannot write effective config into " << opt.out << "\n";
    throw Failure{PTSORT_IO_ERROR};
  }
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

Clouds load_clouds(const std::vector<std::string>& paths) {
  std::vector<const char*> raw_paths;
  for (const auto& p : paths) raw_paths.push_back(p.c_str());
  ptsort_clouds* raw = nullptr;
  check(ptsort_clouds_load(raw_paths.data(), raw_paths.size(), &raw));
  return Clouds(raw);
}

Clouds generate(const ptsort_config* config, std::size_t first, std::size_t count) {
  ptsort_clouds* raw = nullptr;
  check(ptsort_clouds_generate(config, first, count, &raw));
  return Clouds(raw);
}

// Explicit files win; otherwise the configured generator supplies the
// training scenes or the held-out scenes that follow them.
Clouds training_clouds(const ptsort_config* config, const Options& opt) {
  if (!opt.clouds.empty()) return load_clouds(opt.clouds);
  return generate(config, 0, config_size(config, "scene.count"));
}

Clouds held_out_clouds(const ptsort_config* config, const std::vector<std::string>& paths) {
  if (!paths.empty()) return load_clouds(paths);
  const std::size_t held_out = config_size(config, "scene.held_out");
  if (held_out == 0) return nullptr;
  return generate(config, config_size(config, "scene.count"), held_out);
}

void write_report(const ptsort_report* report, const Options& opt, const char* stem) {
  check(ptsort_report_write(report, opt.out.c_str(), stem));
  size_t length = 0;
  check(ptsort_report_text(report, nullptr, 0, &length));
  std::string text(length, '\0');
  check(ptsort_report_text(report, text.data(), length + 1, &length));
  std::cout << text;
}

std::string default_path(const Options& opt, const char* name) {
  return opt.checkpoint.empty() ? (fs::path(opt.out) / name).string() : opt.checkpoint;
}

std::string cloud_name(const char* prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu.optc", prefix, index);
  return buf;
}

void run_gen_scenes(const Options& opt) {
  Config config = load_config(opt, nullptr);
  echo_config(config.get(), opt);
  const std::size_t train = config_size(config.get(), "scene.count");
  const std::size_t held_out = config_size(config.get(), "scene.held_out");
  Clouds clouds = generate(config.get(), 0, train + held_out);
  for (std::size_t i = 0; i < train + held_out; ++i) {
    const std::string name =
        i < train ? cloud_name("train", i) : cloud_name("heldout", i - train);
    const std::string path = (fs::path(opt.out) / name).string();
    check(ptsort_clouds_save(clouds.get(), i, path.c_str()));
    std::cout << path << "\n";
  }
}

void run_train_sorter(const Options& opt) {
  Config config = load_config(opt, "sorter.k");
  echo_config(config.get(), opt);
  Clouds clouds = training_clouds(config.get(), opt);
  ptsort_sorter* raw = nullptr;
  ptsort_history* raw_history = nullptr;
  check(ptsort_sorter_train(config.get(), clouds.get(), &raw, &raw_history));
  Sorter sorter(raw);
  History history(raw_history);
  const std::string path = default_path(opt, "sorter.ckpt");
  check(ptsort_sorter_save(sorter.get(), path.c_str()));
  const std::string history_path = (fs::path(opt.out) / "sorter_history.jsonl").string();
  check(ptsort_history_write(history.get(), history_path.c_str()));
  std::cout << "sorter: " << path << "\nhistory: " << history_path << "\n";
}

void evaluate_into(const ptsort_model* model, const ptsort_clouds* clouds,
                   const ptsort_config* config, const Options& opt, const char* order,
                   const char* stem) {
  ptsort_report* raw = nullptr;
  check(ptsort_model_evaluate(model, clouds, order,
                              config_size(config, "train.metric_k"), &raw));
  Report report(raw);
  write_report(report.get(), opt, stem);
}

void run_train(const Options& opt) {
  Config config = load_config(opt, "sorter.k");
  if (!opt.order.empty()) set(config.get(), "train.serialization", opt.order);
  echo_config(config.get(), opt);
  Clouds clouds = training_clouds(config.get(), opt);
  const std::string path = default_path(opt, "model.ckpt");
  ptsort_model* raw = nullptr;
  ptsort_history* raw_history = nullptr;
  check(ptsort_model_train(config.get(), clouds.get(), path.c_str(), &raw, &raw_history));
  Model model(raw);
  History history(raw_history);
  check(ptsort_model_save(model.get(), path.c_str()));
  const std::string history_path = (fs::path(opt.out) / "history.jsonl").string();
  check(ptsort_history_write(history.get(), history_path.c_str()));
  std::cout << "model: " << path << "\nhistory: " << history_path << "\n";
  evaluate_into(model.get(), clouds.get(), config.get(), opt, nullptr, "train_eval");
  Clouds held_out = held_out_clouds(config.get(), opt.eval_clouds);
  if (held_out) {
    evaluate_into(model.get(), held_out.get(), config.get(), opt, nullptr, "heldout_eval");
  }
}

void run_eval(const Options& opt) {
  if (opt.checkpoint.empty()) {
    std::cerr << "error: eval needs --checkpoint <model checkpoint>\n";
    throw Failure{PTSORT_INVALID_ARGUMENT};
  }
  Config config = load_config(opt, nullptr);
  echo_config(config.get(), opt);
  ptsort_model* raw = nullptr;
  check(ptsort_model_load(opt.checkpoint.c_str(), &raw));
  Model model(raw);
  Clouds clouds = opt.clouds.empty() ? held_out_clouds(config.get(), opt.eval_clouds)
                                     : load_clouds(opt.clouds);
  if (!clouds) {
    std::cerr << "error: no clouds to evaluate (give --clouds or set scene.held_out)\n";
    throw Failure{PTSORT_INVALID_ARGUMENT};
  }
  evaluate_into(model.get(), clouds.get(), config.get(), opt, opt.order.c_str(), "eval");
}

void run_compare_orders(const Options& opt) {
  Config config = load_config(opt, "compare.k");
  echo_config(config.get(), opt);
  Clouds clouds = opt.clouds.empty() ? held_out_clouds(config.get(), opt.eval_clouds)
                                     : load_clouds(opt.clouds);
  if (!clouds) {
    std::cerr << "error: no clouds to compare (give --clouds or set scene.held_out)\n";
    throw Failure{PTSORT_INVALID_ARGUMENT};
  }
  Sorter sorter;
  if (!opt.checkpoint.empty()) {
    ptsort_sorter* raw = nullptr;
    check(ptsort_sorter_load(opt.checkpoint.c_str(), &raw));
    sorter.reset(raw);
  } else if (config_get(config.get(), "compare.methods").find("learned") != std::string::npos) {
    std::cerr << "warning: no --checkpoint given; the learned row is reported as unavailable\n";
  }
  ptsort_report* raw = nullptr;
  check(ptsort_compare_orders(config.get(), clouds.get(), sorter.get(), &raw));
  Report report(raw);
  write_report(report.get(), opt, "compare_orders");
}

void run_ablate_k(const Options& opt) {
  Config config = load_config(opt, nullptr);
  if (opt.k) set(config.get(), "ablation.k_values", std::to_string(*opt.k));
  if (!opt.order.empty()) set(config.get(), "train.serialization", opt.order);
  echo_config(config.get(), opt);
  Clouds train = training_clouds(config.get(), opt);
  Clouds held_out = held_out_clouds(config.get(), opt.eval_clouds);
  ptsort_report* raw = nullptr;
  check(ptsort_ablate_k(config.get(), train.get(), held_out.get(), &raw));
  Report report(raw);
  write_report(report.get(), opt, "ablation");
}

void run_grad_check(const Options& opt) {
  Config config = load_config(opt, nullptr);
  echo_config(config.get(), opt);
  ptsort_report* raw = nullptr;
  const ptsort_status status = ptsort_grad_check(config.get(), &raw);
  Report report(raw);
  if (report) write_report(report.get(), opt, "grad_check");
  check(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned point-cloud serialization toolkit"};
  app.require_subcommand(1);
  Options opt;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Run configuration file");
    sub->add_option("--seed", opt.seed, "Override the run seed");
    sub->add_option("--out", opt.out, "Output directory")->capture_default_str();
  };

  auto* gen = app.add_subcommand("gen-scenes", "Write training and held-out scenes");
  add_common(gen);

  auto* train_sorter = app.add_subcommand("train-sorter", "Train the point sorter alone");
  add_common(train_sorter);
  train_sorter->add_option("--checkpoint", opt.checkpoint, "Sorter checkpoint to write");
  train_sorter->add_option("--k", opt.k, "Override sorter.k");
  train_sorter->add_option("--clouds", opt.clouds, "Training cloud files");

  auto* train = app.add_subcommand("train", "Jointly train sorter and segmentation backbone");
  add_common(train);
  train->add_option("--checkpoint", opt.checkpoint, "Model checkpoint to write");
  train->add_option("--k", opt.k, "Override sorter.k");
  train->add_option("--order", opt.order, "Override train.serialization");
  train->add_option("--clouds", opt.clouds, "Training cloud files");
  train->add_option("--eval-clouds", opt.eval_clouds, "Held-out cloud files");

  auto* eval = app.add_subcommand("eval", "Evaluate a model checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", opt.checkpoint, "Model checkpoint to read");
  eval->add_option("--order", opt.order, "Serialization used at evaluation");
  eval->add_option("--clouds", opt.clouds, "Labeled cloud files");
  eval->add_option("--eval-clouds", opt.eval_clouds, "Alias of --clouds");

  auto* compare = app.add_subcommand("compare-orders", "Locality of every ordering method");
  add_common(compare);
  compare->add_option("--checkpoint", opt.checkpoint, "Sorter or model checkpoint");
  compare->add_option("--k", opt.k, "Override compare.k");
  compare->add_option("--clouds", opt.clouds, "Cloud files");
  compare->add_option("--eval-clouds", opt.eval_clouds, "Alias of --clouds");

  auto* ablate = app.add_subcommand("ablate-k", "Sweep the sorter neighbor count");
  add_common(ablate);
  ablate->add_option("--k", opt.k, "Run a single k instead of ablation.k_values");
  ablate->add_option("--order", opt.order, "Override train.serialization");
  ablate->add_option("--clouds", opt.clouds, "Training cloud files");
  ablate->add_option("--eval-clouds", opt.eval_clouds, "Held-out cloud files");

  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  add_common(grad);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return PTSORT_INVALID_ARGUMENT;
  }

  try {
    if (*gen) run_gen_scenes(opt);
    else if (*train_sorter) run_train_sorter(opt);
    else if (*train) run_train(opt);
    else if (*eval) run_eval(opt);
    else if (*compare) run_compare_orders(opt);
    else if (*ablate) run_ablate_k(opt);
    else if (*grad) run_grad_check(opt);
  } catch (const Failure& f) {
    const std::string message = ptsort_last_error();
    if (!message.empty()) std::cerr << "error: " << message << "\n";
    return f.status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return PTSORT_INTERNAL_ERROR;
  }
  return 0;
}
