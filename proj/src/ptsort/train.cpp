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

#include "ptsort/train.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "ptsort/error.hpp"
#include "ptsort/rng.hpp"

namespace ptsort::train {

namespace {

constexpr std::uint64_t kSorterStream = 0x50A7E5ULL;
constexpr std::uint64_t kBackboneStream = 0xBAC4B0EULL;
constexpr std::uint64_t kShuffleStream = 0x5CE4E5ULL;

struct Prepared {
  const geometry::PointCloud* cloud = nullptr;
  geometry::NeighborTable loss_neighbors;
  geometry::NeighborTable metric_neighbors;
  std::map<std::string, curves::Permutation> static_orders;
};

std::vector<Prepared> prepare(const std::vector<geometry::PointCloud>& clouds,
                              const TrainConfig& config, bool need_labels) {
  require(!clouds.empty(), "training needs at least one cloud");
  std::vector<Prepared> out;
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const auto& cloud = clouds[c];
    cloud.validate();
    require(config.sorter.k < cloud.size(),
            "sorter.k must be smaller than every cloud (cloud " + std::to_string(c) +
                " has " + std::to_string(cloud.size()) + " points)");
    require(cloud.feature_count == clouds.front().feature_count,
            "all clouds must share the feature width");
    if (need_labels) {
      require(cloud.has_labels(), "cloud " + std::to_string(c) + " has no labels");
      require(cloud.class_count == clouds.front().class_count,
              "all clouds must share the class count");
    }
    Prepared p;
    p.cloud = &cloud;
    p.loss_neighbors = geometry::knn(cloud, config.sorter.k);
    p.metric_neighbors =
        geometry::knn(cloud, std::min(config.metric_k, cloud.size() - 1));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::size_t> scene_order(std::size_t count, std::size_t epoch,
                                     const TrainConfig& config) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle_scenes) {
    Rng rng(splitmix64(config.seed ^ kShuffleStream) + epoch);
    rng.shuffle(std::span<std::size_t>(order));
  }
  return order;
}

const curves::Permutation& static_order_cached(Prepared& p, const std::string& name,
                                               int bits) {
  auto it = p.static_orders.find(name);
  if (it == p.static_orders.end()) {
    it = p.static_orders
             .emplace(name, curves::static_order(*p.cloud, curves::parse_variant(name), bits))
             .first;
  }
  return it->second;
}

void scale(const nn::TensorList& grads, double factor) {
  for (const auto& t : grads) {
    for (double& v : t.values) v *= factor;
  }
}

void check_finite(double v, const std::string& what, std::size_t epoch) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNumeric,
                what + " became non-finite in epoch " + std::to_string(epoch));
  }
}

struct SorterStep {
  sorter::OrderingLoss loss;
  double score_std = 0.0;
};

// One ordering-loss step. With weight 0 the loss is only measured: no
// optimizer step and no running-stat update, so the sorter stays frozen.
SorterStep sorter_step(nn::MlpParams& params, nn::AdamState& adam, Prepared& p,
                       const TrainConfig& config, double weight, double lr) {
  const bool update = weight > 0.0;
  auto scores = sorter::score_points(params, *p.cloud, nn::Mode::kTrain, update);
  SorterStep step{sorter::ordering_loss(scores.values, p.loss_neighbors, config.sorter),
                  sorter::score_stddev(scores.values)};
  if (update) {
    auto bw = sorter::score_backward(params, scores, step.loss.grad);
    auto grads = bw.grads.trainable("sorter");
    scale(grads, weight);
    nn::adamw_step(params.trainable("sorter"), grads, adam, lr);
  }
  return step;
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void TrainConfig::validate() const {
  const auto check = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kConfig, what);
  };
  check(epochs >= 1, "train.epochs must be at least 1");
  check(warmup_epochs <= epochs, "train.warmup_epochs (" + std::to_string(warmup_epochs) +
                                     ") exceeds train.epochs (" + std::to_string(epochs) + ")");
  check(lambda >= 0.0, "train.lambda must be nonnegative");
  check(seg_weight >= 0.0, "train.seg_weight must be nonnegative");
  check(bits_per_axis >= 1 && bits_per_axis <= curves::kMaxBitsPerAxis,
        "train.bits_per_axis must lie in [1, 20]");
  check(sorter_max_lr > 0.0, "train.sorter_max_lr must be positive");
  check(schedule.max_lr > 0.0, "schedule.max_lr must be positive");
  check(metric_k >= 1, "train.metric_k must be at least 1");
  check(!warmup_variants.empty(), "train.warmup_variants must not be empty");
  try {
    for (const auto& v : warmup_variants) curves::parse_variant(v);
    if (!learned()) curves::parse_variant(serialization);
    sorter.validate();
    backbone.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"serialization", r.serialization},
          {"L_seg", r.seg_loss},
          {"L_local", r.local_loss},
          {"L_local_per_neighbor", r.local_loss_per_neighbor},
          {"L_dist", r.dist_loss},
          {"L_ord", r.ord_loss},
          {"L_total", r.total_loss},
          {"lr", r.lr},
          {"sorter_lr", r.sorter_lr},
          {"score_std", r.score_std},
          {"retention", r.retention},
          {"train_oa", r.train_oa},
          {"wall_time", r.wall_time}};
}

std::string TrainHistory::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) out += to_json(e).dump() + '\n';
  if (final_eval) out += nlohmann::json{{"final_eval", *final_eval}}.dump() + '\n';
  return out;
}

SorterResult train_sorter(const std::vector<geometry::PointCloud>& clouds,
                          const TrainConfig& config) {
  config.validate();
  auto prepared = prepare(clouds, config, false);
  Rng init(splitmix64(config.seed ^ kSorterStream));
  SorterResult result{sorter::make_sorter(clouds.front().feature_count, config.sorter, init),
                      {}};
  nn::AdamState adam{config.adam, 0, {}, {}};
  nn::OneCycleConfig schedule = config.schedule;
  schedule.max_lr = config.sorter_max_lr;
  const std::uint64_t total = config.epochs * prepared.size();
  std::uint64_t step = 0;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.serialization = kLearned;
    rec.sorter_lr = nn::one_cycle_lr(step, total, schedule);
    for (std::size_t c : scene_order(prepared.size(), epoch, config)) {
      const double lr = nn::one_cycle_lr(step++, total, schedule);
      SorterStep s = sorter_step(result.sorter, adam, prepared[c], config, 1.0, lr);
      check_finite(s.loss.total, "ordering loss", epoch);
      rec.local_loss += s.loss.local;
      rec.dist_loss += s.loss.dist;
      rec.score_std += s.score_std;
    }
    const double inv = 1.0 / static_cast<double>(prepared.size());
    rec.local_loss *= inv;
    rec.dist_loss *= inv;
    rec.score_std *= inv;
    rec.local_loss_per_neighbor = rec.local_loss / static_cast<double>(config.sorter.k);
    rec.ord_loss = config.sorter.local_weight * rec.local_loss +
                   config.sorter.dist_weight * rec.dist_loss;
    rec.total_loss = rec.ord_loss;
    for (auto& p : prepared) {
      const auto perm = sorter::scores_to_permutation(sorter::infer_scores(result.sorter, *p.cloud));
      rec.retention += metrics::neighbor_retention(perm, p.metric_neighbors,
                                                   config.backbone.window_size) * inv;
    }
    if (config.log_wall_time) rec.wall_time = elapsed_since(start);
    result.history.epochs.push_back(rec);
  }
  return result;
}

JointResult train_joint(const std::vector<geometry::PointCloud>& clouds,
                        const TrainConfig& config, const CheckpointHook& hook,
                        std::size_t checkpoint_every) {
  config.validate();
  auto prepared = prepare(clouds, config, true);
  const auto& first = clouds.front();

  JointResult result;
  TrainedModel& model = result.model;
  {
    Rng sorter_init(splitmix64(config.seed ^ kSorterStream));
    model.sorter = sorter::make_sorter(first.feature_count, config.sorter, sorter_init);
    Rng backbone_init(splitmix64(config.seed ^ kBackboneStream));
    model.backbone =
        backbone::make_model(first.feature_count, first.class_count, config.backbone,
                             backbone_init);
  }
  model.serialization = config.serialization;
  model.bits_per_axis = config.bits_per_axis;
  model.feature_count = first.feature_count;
  model.class_names = first.class_names;

  std::vector<curves::CurveVariant> warmup;
  for (const auto& name : config.warmup_variants) warmup.push_back(curves::parse_variant(name));

  nn::AdamState backbone_adam{config.adam, 0, {}, {}};
  nn::AdamState sorter_adam{config.adam, 0, {}, {}};
  nn::OneCycleConfig sorter_schedule = config.schedule;
  sorter_schedule.max_lr = config.sorter_max_lr;
  const std::uint64_t total = config.epochs * prepared.size();
  std::uint64_t step = 0;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const bool warming = epoch < config.warmup_epochs;
    std::string source;
    if (!config.learned()) {
      source = config.serialization;
    } else if (warming) {
      source = curves::variant_name(
          curves::pick_warmup_variant(epoch, config.seed, warmup));
    } else {
      source = kLearned;
    }
    // Permutations are fixed for the whole epoch from the parameters at its start.
    std::vector<curves::Permutation> perms;
    for (auto& p : prepared) {
      if (source == kLearned) {
        perms.push_back(sorter::scores_to_permutation(
            sorter::infer_scores(model.sorter, *p.cloud)));
      } else {
        perms.push_back(static_order_cached(p, source, config.bits_per_axis));
      }
    }
    const double sorter_weight = warming ? 1.0 : config.lambda;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.serialization = source;
    rec.lr = nn::one_cycle_lr(step, total, config.schedule);
    rec.sorter_lr = nn::one_cycle_lr(step, total, sorter_schedule);
    std::uint64_t correct = 0, seen = 0;
    for (std::size_t c : scene_order(prepared.size(), epoch, config)) {
      Prepared& p = prepared[c];
      const double lr = nn::one_cycle_lr(step, total, config.schedule);
      const double sorter_lr = nn::one_cycle_lr(step, total, sorter_schedule);
      ++step;

      auto fw = backbone::segmentation_forward(model.backbone, *p.cloud, perms[c],
                                               nn::Mode::kTrain, config.seg_weight > 0.0);
      auto loss = backbone::segmentation_loss(fw.logits, p.cloud->labels);
      check_finite(loss.loss, "segmentation loss", epoch);
      const auto predicted = backbone::argmax_rows(fw.logits);
      for (std::size_t i = 0; i < predicted.size(); ++i) {
        correct += predicted[i] == p.cloud->labels[i] ? 1 : 0;
      }
      seen += predicted.size();
      if (config.seg_weight > 0.0) {
        auto bw = backbone::segmentation_backward(model.backbone, fw.cache, loss.grad);
        auto grads = bw.grads.trainable();
        scale(grads, config.seg_weight);
        nn::adamw_step(model.backbone.trainable(), grads, backbone_adam, lr);
      }

      SorterStep s = sorter_step(model.sorter, sorter_adam, p, config, sorter_weight, sorter_lr);
      check_finite(s.loss.total, "ordering loss", epoch);

      rec.seg_loss += loss.loss;
      rec.local_loss += s.loss.local;
      rec.dist_loss += s.loss.dist;
      rec.ord_loss += s.loss.total;
      rec.score_std += s.score_std;
      rec.retention += metrics::neighbor_retention(perms[c], p.metric_neighbors,
                                                   config.backbone.window_size);
    }
    const double inv = 1.0 / static_cast<double>(prepared.size());
    rec.seg_loss *= inv;
    rec.local_loss *= inv;
    rec.dist_loss *= inv;
    rec.ord_loss *= inv;
    rec.score_std *= inv;
    rec.retention *= inv;
    rec.local_loss_per_neighbor = rec.local_loss / static_cast<double>(config.sorter.k);
    rec.total_loss = rec.seg_loss + config.lambda * rec.ord_loss;
    rec.train_oa = static_cast<double>(correct) / static_cast<double>(seen);
    if (config.log_wall_time) rec.wall_time = elapsed_since(start);
    result.history.epochs.push_back(rec);

    if (hook && checkpoint_every > 0 && (epoch + 1) % checkpoint_every == 0) {
      hook(epoch, model);
    }
  }

  result.final_train_eval = evaluate(model, clouds, config.metric_k);
  result.history.final_eval =
      nlohmann::json{{"metrics", metrics::to_json(result.final_train_eval.metrics)},
                     {"locality", metrics::to_json(result.final_train_eval.locality)}};
  if (hook) hook(config.epochs - 1, model);
  return result;
}

curves::Permutation serialize(const TrainedModel& model, const geometry::PointCloud& cloud,
                              const std::string& order_override) {
  const std::string& method = order_override.empty() ? model.serialization : order_override;
  if (method == kLearned) {
    return sorter::scores_to_permutation(sorter::infer_scores(model.sorter, cloud));
  }
  return curves::static_order(cloud, curves::parse_variant(method), model.bits_per_axis);
}

Evaluation evaluate(const TrainedModel& model, const std::vector<geometry::PointCloud>& clouds,
                    std::size_t metric_k, const std::string& order_override) {
  require(!clouds.empty(), "evaluate needs at least one cloud");
  const std::string method = order_override.empty() ? model.serialization : order_override;
  Evaluation ev;
  metrics::ConfusionMatrix confusion(model.backbone.class_count);
  ev.locality.k = metric_k;
  ev.locality.window_size = model.backbone.window_size;
  ev.locality.clouds = clouds.size();
  metrics::LocalityRow row{method, true, 0.0, 0.0, {}};
  backbone::ModelParams params = model.backbone;
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const auto& cloud = clouds[c];
    require(cloud.has_labels(), "evaluate: cloud " + std::to_string(c) + " has no labels");
    if (cloud.class_count != model.backbone.class_count) {
      throw Error(ErrorCode::kInvalidArgument,
                  "evaluate: cloud " + std::to_string(c) + " has " +
                      std::to_string(cloud.class_count) + " classes, model expects " +
                      std::to_string(model.backbone.class_count));
    }
    const auto perm = serialize(model, cloud, method);
    auto fw = backbone::segmentation_forward(params, cloud, perm, nn::Mode::kEval);
    confusion.accumulate(backbone::argmax_rows(fw.logits), cloud.labels);
    const auto nn_table = geometry::knn(cloud, std::min(metric_k, cloud.size() - 1));
    row.retention += metrics::neighbor_retention(perm, nn_table, params.window_size);
    row.extent += metrics::window_extent(perm, cloud, params.window_size);
  }
  row.retention /= static_cast<double>(clouds.size());
  row.extent /= static_cast<double>(clouds.size());
  ev.locality.rows.push_back(row);
  std::vector<std::string> names = model.class_names;
  if (names.size() != static_cast<std::size_t>(model.backbone.class_count)) names.clear();
  ev.metrics = metrics::compute_metrics(confusion, names);
  return ev;
}

metrics::LocalityReport compare_orders(const std::vector<geometry::PointCloud>& clouds,
                                       const nn::MlpParams* sorter_params,
                                       const std::vector<std::string>& methods,
                                       std::size_t k, std::size_t window_size,
                                       int bits_per_axis) {
  require(!clouds.empty(), "compare_orders needs at least one cloud");
  require(!methods.empty(), "compare_orders needs at least one ordering method");
  metrics::LocalityReport report;
  report.k = k;
  report.window_size = window_size;
  report.clouds = clouds.size();
  std::vector<geometry::NeighborTable> tables;
  for (const auto& cloud : clouds) {
    tables.push_back(geometry::knn(cloud, std::min(k, cloud.size() - 1)));
  }
  for (const auto& method : methods) {
    metrics::LocalityRow row{method, true, 0.0, 0.0, {}};
    if (method == kLearned && sorter_params == nullptr) {
      row.available = false;
      row.note = "no sorter checkpoint supplied; learned ordering not evaluated";
      report.rows.push_back(row);
      continue;
    }
    for (std::size_t c = 0; c < clouds.size(); ++c) {
      const auto perm =
          method == kLearned
              ? sorter::scores_to_permutation(sorter::infer_scores(*sorter_params, clouds[c]))
              : curves::static_order(clouds[c], curves::parse_variant(method), bits_per_axis);
      row.retention += metrics::neighbor_retention(perm, tables[c], window_size);
      row.extent += metrics::window_extent(perm, clouds[c], window_size);
    }
    row.retention /= static_cast<double>(clouds.size());
    row.extent /= static_cast<double>(clouds.size());
    report.rows.push_back(row);
  }
  return report;
}

AblationTable ablation_sweep(const TrainConfig& base,
                             const std::vector<geometry::PointCloud>& train_clouds,
                             const std::vector<geometry::PointCloud>& eval_clouds,
                             const std::vector<std::size_t>& k_values) {
  require(!k_values.empty(), "ablation needs at least one k");
  AblationTable table;
  for (std::size_t k : k_values) {
    AblationRow row;
    row.k = k;
    try {
      TrainConfig config = base;
      config.sorter.k = k;
      auto run = train_joint(train_clouds, config);
      auto ev = evaluate(run.model, eval_clouds.empty() ? train_clouds : eval_clouds,
                         config.metric_k);
      row.metrics = ev.metrics;
      row.retention = ev.locality.rows.front().retention;
      row.local_loss = run.history.epochs.back().local_loss;
      row.local_loss_per_neighbor = run.history.epochs.back().local_loss_per_neighbor;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

std::vector<metrics::LabeledReport> labeled_ok_rows(const AblationTable& t) {
  std::vector<metrics::LabeledReport> rows;
  for (const auto& r : t.rows) {
    if (r.ok) rows.emplace_back(std::to_string(r.k), r.metrics);
  }
  return rows;
}

std::string failed_rows_csv(const AblationTable& t) {
  std::string out;
  for (const auto& r : t.rows) {
    if (!r.ok) out += std::to_string(r.k) + ",FAILED\n";
  }
  return out;
}

}  // namespace

nlohmann::json AblationTable::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j{{"k", r.k}, {"ok", r.ok}};
    if (r.ok) {
      j["metrics"] = metrics::to_json(r.metrics);
      j["retention"] = r.retention;
      j["L_local"] = r.local_loss;
      j["L_local_per_neighbor"] = r.local_loss_per_neighbor;
    } else {
      j["error"] = r.error;
    }
    arr.push_back(std::move(j));
  }
  return {{"rows", arr}};
}

std::string AblationTable::to_text() const {
  std::string text = metrics::render_text(labeled_ok_rows(*this), "k");
  std::ostringstream extra;
  extra << "\nOrdering statistics\n";
  for (const auto& r : rows) {
    extra << "k=" << r.k << ": ";
    if (r.ok) {
      extra << "retention " << r.retention << ", L_local " << r.local_loss
            << ", L_local/k " << r.local_loss_per_neighbor << '\n';
    } else {
      extra << "FAILED (" << r.error << ")\n";
    }
  }
  return text + extra.str();
}

std::string AblationTable::iou_csv() const {
  return metrics::render_iou_csv(labeled_ok_rows(*this), "k") + failed_rows_csv(*this);
}

std::string AblationTable::acc_csv() const {
  return metrics::render_acc_csv(labeled_ok_rows(*this), "k") + failed_rows_csv(*this);
}

}  // namespace ptsort::train
