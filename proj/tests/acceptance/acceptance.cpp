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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ptsort/curves.hpp"
#include "ptsort/io.hpp"
#include "ptsort/metrics.hpp"
#include "ptsort/nn/optim.hpp"
#include "ptsort/nn/tensor.hpp"
#include "ptsort/sorter.hpp"
#include "ptsort/train.hpp"
#include "ptsort/verify.hpp"
#include "unit/helpers.hpp"

using namespace ptsort;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail += (detail.empty() ? "" : "; ") + ("failed: " + what);
    }
  }
  void note(const std::string& text) { detail += (detail.empty() ? "" : "; ") + text; }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

int failures = 0;

void criterion(int id, const char* title, double limit_seconds,
               const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.passed = false;
    out.note(std::string("exception: ") + e.what());
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_seconds > 0.0) {
    out.require(seconds < limit_seconds, "runtime limit " + fmt("%.0f s", limit_seconds));
  }
  if (!out.passed) ++failures;
  std::printf("%s %d %s [%.1f s] %s\n", out.passed ? "PASS" : "FAIL", id, title, seconds,
              out.detail.c_str());
  std::fflush(stdout);
}

curves::GridCoord cell(std::uint32_t x, std::uint32_t y, std::uint32_t z, int bits) {
  return curves::GridCoord{{x, y, z}, bits};
}

void gradient_suite(Outcome& out) {
  const auto report = verify::run_grad_suite(20, 0);
  for (const auto& c : report.cases) {
    out.require(c.passed, c.name + " max error " + fmt("%.2e", c.max_error));
  }
  out.require(report.cases.size() == 9, "nine gradient cases");
  double worst = 0.0;
  for (const auto& c : report.cases) worst = std::max(worst, c.max_error / c.tolerance);
  out.note("9 cases x 20 seeds, worst error/tolerance " + fmt("%.2f", worst));
}

void curve_correctness(Outcome& out) {
  for (int bits = 1; bits <= 3; ++bits) {
    const std::uint32_t side = 1u << bits;
    const std::uint64_t total = std::uint64_t{1} << (3 * bits);
    std::set<std::uint64_t> mk, hk;
    for (std::uint32_t x = 0; x < side; ++x)
      for (std::uint32_t y = 0; y < side; ++y)
        for (std::uint32_t z = 0; z < side; ++z) {
          const auto c = cell(x, y, z, bits);
          const auto m = curves::morton_encode(c);
          const auto h = curves::hilbert_encode(c);
          out.require(m < total && h < total, "keys in range");
          out.require(curves::morton_decode(m, bits).cell == c.cell, "morton round trip");
          out.require(curves::hilbert_decode(h, bits).cell == c.cell, "hilbert round trip");
          mk.insert(m);
          hk.insert(h);
        }
    out.require(mk.size() == total && hk.size() == total, "bijection at b=" + std::to_string(bits));
    for (std::uint64_t key = 0; key + 1 < total; ++key) {
      const auto a = curves::hilbert_decode(key, bits).cell;
      const auto b = curves::hilbert_decode(key + 1, bits).cell;
      int d = 0;
      for (int i = 0; i < 3; ++i) d += std::abs(int(a[i]) - int(b[i]));
      out.require(d == 1, "hilbert adjacency at key " + std::to_string(key));
    }
  }
  // Adjacent cells at b = 2 whose Morton keys are at least 2^3 apart.
  std::uint64_t widest = 0;
  for (int axis = 0; axis < 3; ++axis)
    for (std::uint32_t x = 0; x < 4; ++x)
      for (std::uint32_t y = 0; y < 4; ++y)
        for (std::uint32_t z = 0; z < 4; ++z) {
          auto next = cell(x, y, z, 2);
          if (++next.cell[axis] >= 4) continue;
          const auto a = curves::morton_encode(cell(x, y, z, 2));
          const auto b = curves::morton_encode(next);
          widest = std::max(widest, a > b ? a - b : b - a);
        }
  out.require(widest >= 8, "morton key-gap witness >= 8");
  out.note("bijective for b=1..3, hilbert unit steps, widest morton gap at b=2: " +
           std::to_string(widest));
}

void loss_fixtures(Outcome& out) {
  const auto within = [&](double got, double want, const std::string& what) {
    out.require(std::abs(got - want) <= 1e-12, what + " = " + fmt("%.17g", got));
  };
  const auto cloud = testing::random_cloud(50, 3);
  const auto nb = geometry::knn(cloud, 6);
  within(sorter::locality_loss(std::vector<double>(50, 0.37), nb).loss, 0.0,
         "L_local(constant)");
  std::vector<double> ramp(50);
  for (std::size_t i = 0; i < 50; ++i) ramp[i] = double(50 - i) / 50.0;
  within(sorter::distribution_loss(ramp).loss, 0.0, "L_dist(ramp)");
  const geometry::NeighborTable pair{1, {1, 0}};
  within(sorter::locality_loss(std::vector<double>{0.0, 1.0}, pair).loss, 1.0, "L_local(N=2)");
  const auto line = geometry::knn(testing::line_cloud({0.0, 1.0, 2.0}), 1);
  within(sorter::locality_loss(std::vector<double>{0.0, 0.5, 1.0}, line).loss, 0.25,
         "L_local(N=3)");
  within(sorter::distribution_loss(std::vector<double>{0.5, 0.5}).loss, 0.125,
         "L_dist(N=2 constant)");
  out.note("0, 0, 1.0, 0.25, 0.125 reproduced to 1e-12");
}

std::vector<double> optimize_scores(const geometry::PointCloud& cloud, std::size_t k,
                                    double dist_weight) {
  Rng init(16);
  sorter::SorterConfig config;
  config.k = k;
  config.dist_weight = dist_weight;
  const auto nb = geometry::knn(cloud, k);
  auto p = sorter::make_sorter(0, config, init);
  nn::AdamState state{nn::AdamConfig{0.9, 0.999, 1e-8, 0.0}, 0, {}, {}};
  for (int step = 0; step < 500; ++step) {
    auto sc = sorter::score_points(p, cloud, nn::Mode::kTrain);
    const auto loss = sorter::ordering_loss(sc.values, nb, config);
    auto back = sorter::score_backward(p, sc, loss.grad);
    nn::adamw_step(p.trainable("s"), back.grads.trainable("s"), state, 0.01);
  }
  return sorter::infer_scores(p, cloud);
}

void mode_collapse(Outcome& out) {
  const auto cloud = testing::random_cloud(256, 15);
  const double collapsed = sorter::score_stddev(optimize_scores(cloud, 4, 0.0));
  const double ks = sorter::ks_distance_to_uniform(optimize_scores(cloud, 4, 1.0));
  out.require(collapsed < 0.01, "L_local-only std " + fmt("%.4g", collapsed));
  out.require(ks < 0.1, "L_local+L_dist KS " + fmt("%.4g", ks));
  out.note("256 points, k=4, 500 AdamW steps: L_local-only std " + fmt("%.2e", collapsed) +
           ", with L_dist KS " + fmt("%.3f", ks));
}

geometry::PointCloud strip_scene(std::uint64_t seed) {
  geometry::SceneConfig sc;
  sc.ground_planes = sc.intact_boxes = sc.collapsed_boxes = sc.tree_blobs = 0;
  sc.road_strips = 4;
  sc.points_per_primitive = 400;
  sc.seed = seed;
  return geometry::generate_scene(sc);
}

void locality_improvement(Outcome& out) {
  int wins = 0;
  std::string rows;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<geometry::PointCloud> train_clouds, held_out;
    for (std::uint64_t i = 0; i < 3; ++i) train_clouds.push_back(strip_scene(1000 * seed + i));
    for (std::uint64_t i = 0; i < 3; ++i) held_out.push_back(strip_scene(1000 * seed + 500 + i));
    train::TrainConfig config;
    config.seed = seed;
    config.epochs = 200;  // 3 clouds per epoch: 600 steps
    config.warmup_epochs = 0;
    const auto run = train::train_sorter(train_clouds, config);
    const auto report =
        train::compare_orders(held_out, &run.sorter, {"learned", "z"}, 8, 16);
    const double learned = report.rows[0].retention, z = report.rows[1].retention;
    wins += learned >= z ? 1 : 0;
    rows += (rows.empty() ? "" : ", ") + fmt("%.3f", learned) + "/" + fmt("%.3f", z);
  }
  out.require(wins >= 4, std::to_string(wins) + "/5 seeds");
  out.note("strip scenes (aspect 20), 600 steps; learned/z retention per seed: " + rows +
           "; wins " + std::to_string(wins) + "/5");
}

std::vector<double> parameters(train::TrainedModel model) {
  auto flat = nn::flatten(model.backbone.trainable());
  for (const auto& list : {model.backbone.buffers(), model.sorter.trainable("s"),
                           model.sorter.buffers("s")}) {
    const auto more = nn::flatten(list);
    flat.insert(flat.end(), more.begin(), more.end());
  }
  return flat;
}

void end_to_end(Outcome& out) {
  const io::RunConfig config;  // 8 scenes, 200 epochs, W = 5, lambda = 1
  out.require(config.scene_count == 8 && config.train.epochs == 200 &&
                  config.train.warmup_epochs == 5 && config.train.lambda == 1.0,
              "default run settings");
  const auto train_clouds = io::generate_scenes(config, 0, config.scene_count);
  const auto held_out = io::generate_scenes(config, config.scene_count, config.held_out_count);
  std::size_t points = 0;
  for (const auto& c : train_clouds) points += c.size();

  const auto start = std::chrono::steady_clock::now();
  const auto run = train::train_joint(train_clouds, config.train);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double oa = run.final_train_eval.metrics.oa;
  const auto held = train::evaluate(run.model, held_out, config.train.metric_k);
  out.require(oa > 0.9, "final training OA " + fmt("%.4f", oa));
  out.require(seconds < 900.0, "single run under 15 min");
  for (std::size_t e = 0; e < run.history.epochs.size(); ++e) {
    const bool warm = e < 5;
    out.require((run.history.epochs[e].serialization == train::kLearned) != warm,
                "serialization source of epoch " + std::to_string(e));
  }

  // Reported, not asserted: mixed scenes favor the static curves (see README).
  const auto locality =
      train::compare_orders(held_out, &run.model.sorter, {"learned", "z"}, 8,
                            config.train.backbone.window_size, config.train.bits_per_axis);

  const auto again = train::train_joint(train_clouds, config.train);
  out.require(again.history.to_jsonl() == run.history.to_jsonl(), "identical history");
  out.require(parameters(again.model) == parameters(run.model), "identical parameters");

  out.note(std::to_string(train_clouds.size()) + " scenes, " +
           std::to_string(points / train_clouds.size()) + " points each, one run " +
           fmt("%.0f s", seconds) + ": train OA " + fmt("%.4f", oa) + ", held-out mIoU " +
           fmt("%.4f", held.metrics.miou) + " (OA " + fmt("%.4f", held.metrics.oa) +
           "), rerun bit-identical; held-out retention learned " +
           fmt("%.3f", locality.rows[0].retention) + " vs z " +
           fmt("%.3f", locality.rows[1].retention));
}

metrics::ConfusionMatrix from_counts(const std::vector<std::vector<int>>& counts) {
  const int c = static_cast<int>(counts.size());
  metrics::ConfusionMatrix m(c);
  for (int t = 0; t < c; ++t)
    for (int p = 0; p < c; ++p) {
      const std::vector<int> preds(static_cast<std::size_t>(counts[t][p]), p);
      m.accumulate(preds, std::vector<int>(preds.size(), t));
    }
  return m;
}

void metrics_oracle(Outcome& out) {
  const auto half = metrics::compute_metrics(from_counts({{5, 0}, {5, 0}}));
  out.require(half.iou == std::vector<double>{0.5, 0.0}, "[[5,0],[5,0]] IoU");
  out.require(half.miou == 0.25 && half.oa == 0.5, "[[5,0],[5,0]] mIoU/OA");
  const auto mixed = metrics::compute_metrics(from_counts({{2, 0, 1}, {1, 3, 1}, {0, 1, 0}}));
  out.require(mixed.iou == std::vector<double>{0.5, 0.5, 0.0}, "3-class IoU");
  out.require(mixed.miou == (0.5 + 0.5 + 0.0) / 3.0, "3-class mIoU");
  out.require(mixed.oa == 5.0 / 9.0, "3-class OA");
  out.require(mixed.accuracy == std::vector<double>{2.0 / 3.0, 3.0 / 5.0, 0.0}, "3-class accuracy");
  const auto diag = metrics::compute_metrics(from_counts({{3, 0}, {0, 4}}));
  out.require(diag.miou == 1.0 && diag.macc == 1.0 && diag.oa == 1.0, "diagonal");

  const auto named = metrics::compute_metrics(
      from_counts({{1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 1, 0},
                   {0, 0, 0, 0, 1}}),
      geometry::scene_class_names());
  const std::vector<metrics::LabeledReport> rows{{"learned", named}};
  const auto iou = metrics::render_iou_csv(rows);
  const std::string header = iou.substr(0, iou.find('\n'));
  out.require(header == "Method,mIoU,Background,Bldg-Dmg,Bldg-No-Dmg,Road,Tree",
              "IoU CSV header '" + header + "'");
  out.note("hand fixtures exact; CSV header " + header);
}

void ablation_harness(Outcome& out) {
  io::RunConfig config;
  config.scene.points_per_primitive = 40;
  config.train.epochs = 6;
  config.train.warmup_epochs = 2;
  const auto train_clouds = io::generate_scenes(config, 0, 3);
  const auto eval_clouds = io::generate_scenes(config, 3, 1);
  const std::vector<std::size_t> ks{4, 8, 16, 24, 32};

  const auto table = train::ablation_sweep(config.train, train_clouds, eval_clouds, ks);
  out.require(table.rows.size() == 5, "five rows");
  for (const auto& r : table.rows) out.require(r.ok, "row k=" + std::to_string(r.k) + " " + r.error);
  const auto csv = table.iou_csv();
  out.require(std::count(csv.begin(), csv.end(), '\n') == 6, "header plus five CSV rows");

  const auto rerun = train::ablation_sweep(config.train, train_clouds, eval_clouds, ks);
  out.require(rerun.to_json() == table.to_json(), "seed-stable rerun");

  const auto alone = train::ablation_sweep(config.train, train_clouds, eval_clouds, {16});
  out.require(alone.to_json().at("rows")[0] == table.to_json().at("rows")[2],
              "k=16 alone equals its row");
  const auto dropped =
      train::ablation_sweep(config.train, train_clouds, eval_clouds, {4, 8, 24, 32});
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t full = i < 2 ? i : i + 1;
    out.require(dropped.to_json().at("rows")[i] == table.to_json().at("rows")[full],
                "removing k=16 leaves row " + std::to_string(ks[full]) + " unchanged");
  }
  std::string summary;
  for (const auto& r : table.rows) {
    summary += (summary.empty() ? "" : ", ") + std::to_string(r.k) + ":" +
               fmt("%.1f", 100.0 * r.metrics.miou);
  }
  out.note("mIoU by k " + summary + "; rerun and leave-one-out identical");
}

}  // namespace

int main() {
  criterion(1, "gradient suite", 60.0, gradient_suite);
  criterion(2, "curve correctness", 5.0, curve_correctness);
  criterion(3, "loss fixtures", 0.0, loss_fixtures);
  criterion(4, "mode collapse", 30.0, mode_collapse);
  criterion(5, "locality improvement on strip scenes", 300.0, locality_improvement);
  criterion(6, "toy end-to-end regression", 0.0, end_to_end);
  criterion(7, "metrics oracle", 0.0, metrics_oracle);
  criterion(8, "ablation harness", 0.0, ablation_harness);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
