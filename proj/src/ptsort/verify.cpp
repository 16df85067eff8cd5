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

#include "ptsort/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <functional>
#include <numeric>

#include "ptsort/backbone.hpp"
#include "ptsort/geometry.hpp"
#include "ptsort/nn/losses.hpp"
#include "ptsort/nn/mlp.hpp"
#include "ptsort/rng.hpp"
#include "ptsort/sorter.hpp"

namespace ptsort::verify {

namespace {

constexpr double kStep = 1e-5;
constexpr double kTolerance = 1e-6;
constexpr double kPipelineTolerance = 1e-5;

// Returns (max relative error, coordinates) for one random instance.
using Instance = std::function<nn::GradCheckResult(Rng&, std::size_t& coordinates)>;

nn::Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  nn::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal(0.0, scale);
  return m;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// Objectives below are accumulated in long double and reported relative to
// their value at the unperturbed point. Central differences then see the
// rounding of the model outputs only, not the rounding of an O(1) total,
// which would otherwise swamp gradient coordinates near 1e-6.
class Baseline {
 public:
  double operator()(long double value) {
    if (!set_) {
      base_ = value;
      set_ = true;
    }
    return static_cast<double>(value - base_);
  }

 private:
  long double base_ = 0.0L;
  bool set_ = false;
};

long double weighted_sum(const nn::Matrix& m, const nn::Matrix& weights) {
  long double s = 0.0L;
  auto mv = m.values();
  auto wv = weights.values();
  for (std::size_t i = 0; i < mv.size(); ++i) {
    s += static_cast<long double>(mv[i]) * static_cast<long double>(wv[i]);
  }
  return s;
}

// Mean softmax cross-entropy, evaluated independently of nn::softmax_cross_entropy.
long double cross_entropy_oracle(const nn::Matrix& logits, std::span<const int> labels) {
  long double total = 0.0L;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    long double peak = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      peak = std::max<long double>(peak, logits(r, c));
    }
    long double sum = 0.0L;
    for (std::size_t c = 0; c < logits.cols(); ++c) sum += std::exp(logits(r, c) - peak);
    total += peak + std::log(sum) - logits(r, static_cast<std::size_t>(labels[r]));
  }
  return total / static_cast<long double>(logits.rows());
}

void jitter(const nn::TensorList& tensors, Rng& rng, double scale) {
  for (const auto& t : tensors) {
    for (double& v : t.values) v += rng.normal(0.0, scale);
  }
}

// Scores spread over [0, 1) with a minimum gap of 0.2/n, in random order, so
// no perturbation of size h can reorder them.
std::vector<double> tie_free_scores(std::size_t n, Rng& rng) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = (static_cast<double>(i) + 0.1 + 0.8 * rng.uniform()) / static_cast<double>(n);
  }
  rng.shuffle(std::span<double>(s));
  return s;
}

geometry::PointCloud random_cloud(std::size_t n, std::size_t features, int classes, Rng& rng) {
  geometry::PointCloud cloud;
  cloud.feature_count = features;
  cloud.class_count = classes;
  for (std::size_t i = 0; i < n; ++i) {
    cloud.positions.push_back({rng.uniform(0.0, 4.0), rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0)});
    for (std::size_t f = 0; f < features; ++f) cloud.features.push_back(rng.uniform());
    cloud.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
  }
  return cloud;
}

// Parameters and, optionally, one input matrix exposed as a single flat
// vector for grad_check.
struct Flat {
  nn::TensorList params;
  nn::Matrix* inputs = nullptr;

  std::vector<double> get() const {
    auto x = nn::flatten(params);
    if (inputs != nullptr) x.insert(x.end(), inputs->values().begin(), inputs->values().end());
    return x;
  }
  void set(std::span<const double> x) const {
    const std::size_t p = nn::element_count(params);
    nn::unflatten(x.first(p), params);
    if (inputs != nullptr) {
      std::copy(x.begin() + static_cast<std::ptrdiff_t>(p), x.end(), inputs->values().begin());
    }
  }
  void write_grad(const nn::TensorList& grads, const nn::Matrix* grad_inputs,
                  std::span<double> out) const {
    const auto g = nn::flatten(grads);
    std::copy(g.begin(), g.end(), out.begin());
    if (inputs != nullptr) {
      std::copy(grad_inputs->values().begin(), grad_inputs->values().end(),
                out.begin() + static_cast<std::ptrdiff_t>(g.size()));
    }
  }
};

nn::GradCheckResult mlp_case(Rng& rng, std::size_t& coords, nn::Mode mode) {
  auto params = nn::make_mlp({5, 7, 6, 3}, true, rng);
  jitter(params.trainable("mlp"), rng, 0.3);
  for (auto& bn : params.norms) {
    for (double& m : bn.running_mean) m = rng.normal(0.0, 0.5);
    for (double& v : bn.running_var) v = rng.uniform(0.5, 2.0);
  }
  nn::Matrix inputs = random_matrix(9, 5, rng);
  const nn::Matrix weights = random_matrix(9, 3, rng);
  Flat flat{params.trainable("mlp"), &inputs};
  const auto x0 = flat.get();
  coords = x0.size();
  Baseline baseline;
  return nn::grad_check(
      [&](std::span<const double> x, std::span<double> grad) {
        flat.set(x);
        auto fw = nn::mlp_forward(params, inputs, mode, false);
        if (!grad.empty()) {
          auto bw = nn::mlp_backward(params, fw.cache, weights);
          flat.write_grad(bw.grads.trainable("mlp"), &bw.grad_inputs, grad);
        }
        return baseline(weighted_sum(fw.outputs, weights));
      },
      x0, kStep);
}

nn::GradCheckResult scoring_case(Rng& rng, std::size_t& coords) {
  const auto cloud = random_cloud(14, 2, 2, rng);
  sorter::SorterConfig cfg;
  cfg.hidden = {8, 6};
  auto params = sorter::make_sorter(2, cfg, rng);
  jitter(params.trainable("sorter"), rng, 0.2);
  const auto weights = random_vector(cloud.size(), rng);
  Flat flat{params.trainable("sorter"), nullptr};
  const auto x0 = flat.get();
  coords = x0.size();
  Baseline baseline;
  return nn::grad_check(
      [&](std::span<const double> x, std::span<double> grad) {
        flat.set(x);
        auto scores = sorter::score_points(params, cloud, nn::Mode::kTrain, false);
        long double f = 0.0L;
        for (std::size_t i = 0; i < weights.size(); ++i) {
          f += static_cast<long double>(scores.values[i]) * weights[i];
        }
        if (!grad.empty()) {
          auto bw = sorter::score_backward(params, scores, weights);
          flat.write_grad(bw.grads.trainable("sorter"), nullptr, grad);
        }
        return baseline(f);
      },
      x0, kStep);
}

// Library loss supplies the analytic gradient, `oracle` the value.
using ScoreLoss = std::function<sorter::LossGrad(std::span<const double>)>;
using ScoreOracle = std::function<long double(std::span<const double>)>;

nn::GradCheckResult score_loss_case(Rng& rng, std::size_t& coords, const ScoreLoss& loss,
                                    const ScoreOracle& oracle) {
  const auto x0 = tie_free_scores(24, rng);
  coords = x0.size();
  Baseline baseline;
  return nn::grad_check(
      [&](std::span<const double> x, std::span<double> grad) {
        if (!grad.empty()) {
          auto r = loss(x);
          std::copy(r.grad.begin(), r.grad.end(), grad.begin());
        }
        return baseline(oracle(x));
      },
      x0, kStep);
}

long double locality_oracle(std::span<const double> s, const geometry::NeighborTable& nbrs) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j : nbrs.row(i)) {
      const long double d = static_cast<long double>(s[i]) - s[j];
      total += d * d;
    }
  }
  return total / static_cast<long double>(s.size());
}

long double distribution_oracle(std::span<const double> s, bool one_based) {
  std::vector<double> sorted(s.begin(), s.end());
  std::sort(sorted.begin(), sorted.end());
  const long double n = static_cast<long double>(s.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const long double t = (static_cast<long double>(i) + (one_based ? 1.0L : 0.0L)) / n;
    const long double d = sorted[i] - t;
    total += d * d;
  }
  return total / n;
}

nn::GradCheckResult locality_case(Rng& rng, std::size_t& coords) {
  const auto cloud = random_cloud(24, 0, 1, rng);
  const auto nbrs = geometry::knn_brute_force(cloud, 4);
  return score_loss_case(
      rng, coords, [&](std::span<const double> s) { return sorter::locality_loss(s, nbrs); },
      [&](std::span<const double> s) { return locality_oracle(s, nbrs); });
}

nn::GradCheckResult distribution_case(Rng& rng, std::size_t& coords) {
  const bool one_based = rng.below(2) == 0;
  return score_loss_case(
      rng, coords,
      [&](std::span<const double> s) { return sorter::distribution_loss(s, one_based); },
      [&](std::span<const double> s) { return distribution_oracle(s, one_based); });
}

nn::GradCheckResult ordering_case(Rng& rng, std::size_t& coords) {
  const auto cloud = random_cloud(24, 0, 1, rng);
  const auto nbrs = geometry::knn_brute_force(cloud, 5);
  sorter::SorterConfig cfg;
  cfg.local_weight = rng.uniform(0.5, 2.0);
  cfg.dist_weight = rng.uniform(0.5, 2.0);
  return score_loss_case(
      rng, coords,
      [&](std::span<const double> s) {
        auto r = sorter::ordering_loss(s, nbrs, cfg);
        return sorter::LossGrad{r.total, r.grad};
      },
      [&](std::span<const double> s) {
        return cfg.local_weight * locality_oracle(s, nbrs) +
               cfg.dist_weight * distribution_oracle(s, cfg.one_based_ramp);
      });
}

nn::GradCheckResult cross_entropy_case(Rng& rng, std::size_t& coords) {
  nn::Matrix logits = random_matrix(10, 5, rng, 2.0);
  std::vector<int> labels(10);
  for (int& l : labels) l = static_cast<int>(rng.below(5));
  const std::vector<double> x0(logits.values().begin(), logits.values().end());
  coords = x0.size();
  Baseline baseline;
  return nn::grad_check(
      [&](std::span<const double> x, std::span<double> grad) {
        std::copy(x.begin(), x.end(), logits.values().begin());
        if (!grad.empty()) {
          auto r = nn::softmax_cross_entropy(logits, labels);
          std::copy(r.grad.values().begin(), r.grad.values().end(), grad.begin());
        }
        return baseline(cross_entropy_oracle(logits, labels));
      },
      x0, kStep);
}

nn::GradCheckResult attention_case(Rng& rng, std::size_t& coords) {
  auto params = backbone::make_attention(8, 2, rng);
  jitter(params.trainable("attn"), rng, 0.2);
  nn::Matrix features = random_matrix(13, 8, rng);
  const auto partition = backbone::partition_windows(13, 5);
  const nn::Matrix weights = random_matrix(13, 8, rng);
  Flat flat{params.trainable("attn"), &features};
  const auto x0 = flat.get();
  coords = x0.size();
  Baseline baseline;
  return nn::grad_check(
      [&](std::span<const double> x, std::span<double> grad) {
        flat.set(x);
        auto fw = backbone::window_attention_forward(params, features, partition);
        if (!grad.empty()) {
          auto bw = backbone::window_attention_backward(params, fw.cache, weights);
          flat.write_grad(bw.grads.trainable("attn"), &bw.grad_features, grad);
        }
        return baseline(weighted_sum(fw.outputs, weights));
      },
      x0, kStep);
}

nn::GradCheckResult pipeline_case(Rng& rng, std::size_t& coords) {
  const auto cloud = random_cloud(32, 3, 5, rng);
  backbone::BackboneConfig cfg;
  cfg.width = 8;
  cfg.heads = 2;
  cfg.blocks = 2;
  cfg.window_size = 8;
  auto model = backbone::make_model(3, 5, cfg, rng);
  jitter(model.trainable(), rng, 0.25);
  nn::Matrix inputs = sorter::sorter_inputs(cloud);
  curves::Permutation perm{std::vector<std::size_t>(cloud.size())};
  std::iota(perm.order.begin(), perm.order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(perm.order));
  Flat flat{model.trainable(), &inputs};
  const auto x0 = flat.get();
  coords = x0.size();
  Baseline baseline;
  return nn::grad_check(
      [&](std::span<const double> x, std::span<double> grad) {
        flat.set(x);
        auto fw = backbone::segmentation_forward(model, inputs, perm, nn::Mode::kTrain, false);
        if (!grad.empty()) {
          auto loss = backbone::segmentation_loss(fw.logits, cloud.labels);
          auto bw = backbone::segmentation_backward(model, fw.cache, loss.grad);
          flat.write_grad(bw.grads.trainable(), &bw.grad_inputs, grad);
        }
        return baseline(cross_entropy_oracle(fw.logits, cloud.labels));
      },
      x0, kStep);
}

struct CaseSpec {
  const char* name;
  double tolerance;
  Instance run;
};

const std::vector<CaseSpec>& case_specs() {
  static const std::vector<CaseSpec> specs = {
      {"mlp_batchnorm_gelu_train", kTolerance,
       [](Rng& r, std::size_t& c) { return mlp_case(r, c, nn::Mode::kTrain); }},
      {"mlp_batchnorm_gelu_eval", kTolerance,
       [](Rng& r, std::size_t& c) { return mlp_case(r, c, nn::Mode::kEval); }},
      {"sigmoid_scoring", kTolerance, scoring_case},
      {"locality_loss", kTolerance, locality_case},
      {"distribution_loss", kTolerance, distribution_case},
      {"ordering_loss", kTolerance, ordering_case},
      {"softmax_cross_entropy", kTolerance, cross_entropy_case},
      {"window_attention", kTolerance, attention_case},
      {"segmentation_pipeline", kPipelineTolerance, pipeline_case},
  };
  return specs;
}

}  // namespace

std::vector<std::string> grad_case_names() {
  std::vector<std::string> names;
  for (const auto& s : case_specs()) names.emplace_back(s.name);
  return names;
}

bool GradSuiteReport::passed() const {
  if (cases.empty()) return false;
  for (const auto& c : cases) {
    if (!c.passed) return false;
  }
  return true;
}

nlohmann::json GradSuiteReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cases) {
    arr.push_back({{"name", c.name},
                   {"seeds", c.seeds},
                   {"coordinates", c.coordinates},
                   {"max_relative_error", c.max_error},
                   {"worst_seed", c.worst_seed},
                   {"tolerance", c.tolerance},
                   {"passed", c.passed}});
  }
  return {{"step", step}, {"passed", passed()}, {"cases", arr}};
}

std::string GradSuiteReport::to_text() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-26s %6s %7s %12s %10s  %s\n", "case", "seeds", "coords",
                "max_rel_err", "tolerance", "result");
  out += line;
  for (const auto& c : cases) {
    std::snprintf(line, sizeof line, "%-26s %6zu %7zu %12.3e %10.1e  %s\n", c.name.c_str(),
                  c.seeds, c.coordinates, c.max_error, c.tolerance, c.passed ? "PASS" : "FAIL");
    out += line;
  }
  out += passed() ? "all gradient checks passed\n" : "gradient checks FAILED\n";
  return out;
}

GradSuiteReport run_grad_suite(std::size_t seeds, std::uint64_t base_seed) {
  const auto start = std::chrono::steady_clock::now();
  GradSuiteReport report;
  report.step = kStep;
  for (std::size_t ci = 0; ci < case_specs().size(); ++ci) {
    const auto& spec = case_specs()[ci];
    GradCase result;
    result.name = spec.name;
    result.tolerance = spec.tolerance;
    result.seeds = seeds;
    for (std::size_t s = 0; s < seeds; ++s) {
      const std::uint64_t seed = base_seed + s;
      Rng rng(splitmix64(seed) ^ (0x9E37ULL * (ci + 1)));
      std::size_t coords = 0;
      const auto r = spec.run(rng, coords);
      result.coordinates = coords;
      if (s == 0 || r.max_relative_error > result.max_error) {
        result.max_error = r.max_relative_error;
        result.worst_seed = seed;
      }
    }
    result.passed = seeds > 0 && result.max_error < result.tolerance;
    report.cases.push_back(result);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace ptsort::verify
