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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptsort/nn/losses.hpp"
#include "ptsort/nn/optim.hpp"
#include "ptsort/sorter.hpp"
#include "unit/helpers.hpp"

using namespace ptsort;
using namespace ptsort::sorter;
using ptsort::testing::error_code_of;
using ptsort::testing::line_cloud;
using ptsort::testing::random_cloud;

namespace {

geometry::NeighborTable table(std::size_t k, std::vector<std::size_t> indices) {
  return {k, std::move(indices)};
}

std::vector<double> tie_free(std::size_t n, Rng& rng) {
  // Evenly spaced values jittered by less than half the spacing, shuffled.
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = (double(i) + 0.5 + rng.uniform(-0.3, 0.3)) / double(n);
  }
  rng.shuffle(std::span<double>(s));
  return s;
}

nn::Objective scalar_loss(std::function<LossGrad(std::span<const double>)> f) {
  return [f](std::span<const double> x, std::span<double> g) {
    auto r = f(x);
    if (!g.empty()) std::copy(r.grad.begin(), r.grad.end(), g.begin());
    return r.loss;
  };
}

}  // namespace

TEST_CASE("scores: sigmoid(0) and saturation") {
  Rng rng(1);
  const auto cloud = random_cloud(20, 2, 3);
  auto p = make_sorter(3, SorterConfig{}, rng);
  CHECK(p.dims == std::vector<std::size_t>{6, 64, 64, 1});
  auto& last = p.layers.back();
  for (double& w : last.weight.values()) w = 0.0;
  last.bias = {0.0};
  for (double s : infer_scores(p, cloud)) CHECK(s == 0.5);
  last.bias = {30.0};
  for (double s : infer_scores(p, cloud)) CHECK(std::abs(s - 1.0) < 1e-9);
}

TEST_CASE("scores: composition of mlp_forward and sigmoid") {
  Rng rng(3);
  const auto cloud = random_cloud(30, 4, 2, 0, 10.0);
  auto p = make_sorter(2, SorterConfig{{8, 6}, 4}, rng);
  const auto inputs = sorter_inputs(cloud);
  auto copy = p;
  const auto raw = nn::mlp_forward(copy, inputs, nn::Mode::kTrain, false).outputs;
  const auto scores = score_points(p, cloud, nn::Mode::kTrain, false);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(scores.values[i] == doctest::Approx(1.0 / (1.0 + std::exp(-raw(i, 0)))).epsilon(1e-15));
    CHECK(scores.values[i] >= 0.0);
    CHECK(scores.values[i] <= 1.0);
  }
  CHECK(infer_scores(p, cloud) == score_points(p, cloud, nn::Mode::kEval).values);
}

TEST_CASE("sorter_inputs: zero mean, unit max extent, features appended") {
  const auto cloud = random_cloud(50, 5, 2, 0, 30.0);
  const auto in = sorter_inputs(cloud);
  REQUIRE(in.cols() == 5);
  std::array<double, 3> lo{1e9, 1e9, 1e9}, hi{-1e9, -1e9, -1e9}, mean{};
  for (std::size_t r = 0; r < in.rows(); ++r)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], in(r, a));
      hi[a] = std::max(hi[a], in(r, a));
      mean[a] += in(r, a) / double(in.rows());
    }
  double widest = 0;
  for (int a = 0; a < 3; ++a) {
    CHECK(std::abs(mean[a]) < 1e-12);
    widest = std::max(widest, hi[a] - lo[a]);
  }
  CHECK(widest == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(in(7, 3) == cloud.features[14]);
  CHECK(in(7, 4) == cloud.features[15]);
}

TEST_CASE("scores_to_permutation fixtures and invariance") {
  CHECK(scores_to_permutation(std::vector<double>{0.3, 0.1, 0.2}).order ==
        std::vector<std::size_t>{1, 2, 0});
  CHECK(scores_to_permutation(std::vector<double>(6, 0.4)).order ==
        curves::Permutation::identity(6).order);

  Rng rng(6);
  std::vector<double> s(1000);
  for (double& v : s) v = rng.uniform();
  const auto perm = scores_to_permutation(s);
  CHECK(perm.is_valid());
  for (std::size_t p = 1; p < perm.size(); ++p) CHECK(s[perm.order[p - 1]] <= s[perm.order[p]]);

  std::vector<double> transformed(s.size());
  std::transform(s.begin(), s.end(), transformed.begin(),
                 [](double v) { return std::exp(3 * v) - 7.0; });
  CHECK(scores_to_permutation(transformed).order == perm.order);

  CHECK(error_code_of([] { scores_to_permutation(std::vector<double>{0.1, std::nan("")}); }) ==
        ErrorCode::kNumeric);
}

TEST_CASE("locality_loss fixtures") {
  const auto pair = table(1, {1, 0});
  const auto constant = locality_loss(std::vector<double>{0.4, 0.4}, pair);
  CHECK(constant.loss == 0.0);
  CHECK(constant.grad == std::vector<double>{0.0, 0.0});

  const auto two = locality_loss(std::vector<double>{0.0, 1.0}, pair);
  CHECK(two.loss == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(two.grad[0] + 2.0) < 1e-12);
  CHECK(std::abs(two.grad[1] - 2.0) < 1e-12);

  const auto line = geometry::knn(line_cloud({0.0, 1.0, 2.0}), 1);
  CHECK(std::abs(locality_loss(std::vector<double>{0.0, 0.5, 1.0}, line).loss - 0.25) < 1e-12);

  CHECK(error_code_of([] { locality_loss(std::vector<double>{0.1, 0.2}, table(1, {0, 0})); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(error_code_of([] { locality_loss(std::vector<double>{0.1, 0.2}, table(1, {5, 0})); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("distribution_loss fixtures") {
  const auto exact = distribution_loss(std::vector<double>{1.0, 0.5});
  CHECK(exact.loss == 0.0);
  CHECK(exact.grad == std::vector<double>{0.0, 0.0});
  CHECK(std::abs(distribution_loss(std::vector<double>{0.5, 0.5}).loss - 0.125) < 1e-12);
  // Zero-based ramp: targets 0 and 0.5.
  CHECK(std::abs(distribution_loss(std::vector<double>{0.0, 0.5}, false).loss) < 1e-15);

  Rng rng(7);
  auto ramp = std::vector<double>(10);
  for (std::size_t i = 0; i < 10; ++i) ramp[i] = double(i + 1) / 10.0;
  rng.shuffle(std::span<double>(ramp));
  CHECK(distribution_loss(ramp).loss < 1e-30);
}

TEST_CASE("ordering_loss is the sum of its parts") {
  const auto pair = table(1, {1, 0});
  const auto r = ordering_loss(std::vector<double>{0.5, 1.0}, pair);
  CHECK(std::abs(r.local - 0.25) < 1e-12);
  CHECK(std::abs(r.dist) < 1e-15);
  CHECK(std::abs(r.total - 0.25) < 1e-12);

  Rng rng(8);
  const auto cloud = random_cloud(40, 9);
  const auto nb = geometry::knn(cloud, 5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = tie_free(40, rng);
    const auto o = ordering_loss(s, nb);
    const auto l = locality_loss(s, nb);
    const auto d = distribution_loss(s);
    CHECK(std::abs(o.total - (l.loss + d.loss)) <= 1e-15);
    CHECK(o.total > 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(o.grad[i] == l.grad[i] + d.grad[i]);
  }
}

TEST_CASE("loss properties: nonnegative, zero exactly on their minimizers") {
  Rng rng(10);
  const auto cloud = random_cloud(60, 11);
  const auto nb = geometry::knn(cloud, 4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(60);
    for (double& v : s) v = rng.uniform();
    CHECK(locality_loss(s, nb).loss > 0.0);
    CHECK(distribution_loss(s).loss > 0.0);
  }
  // Two far-apart clusters: constant per component gives zero locality.
  geometry::PointCloud two;
  for (int i = 0; i < 5; ++i) two.positions.push_back({0.01 * i, 0, 0});
  for (int i = 0; i < 5; ++i) two.positions.push_back({100 + 0.01 * i, 0, 0});
  const auto nb2 = geometry::knn(two, 2);
  std::vector<double> per_component{0.2, 0.2, 0.2, 0.2, 0.2, 0.9, 0.9, 0.9, 0.9, 0.9};
  CHECK(locality_loss(per_component, nb2).loss == 0.0);
}

TEST_CASE("loss gradients pass finite differences on tie-free inputs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    const auto cloud = random_cloud(30, seed);
    const auto nb = geometry::knn(cloud, 1 + seed % 6);
    const auto s = tie_free(30, rng);
    CAPTURE(seed);
    CHECK(nn::grad_check(scalar_loss([&](auto x) { return locality_loss(x, nb); }), s)
              .max_relative_error < 1e-6);
    CHECK(nn::grad_check(scalar_loss([&](auto x) { return distribution_loss(x, seed % 2); }), s)
              .max_relative_error < 1e-6);
  }
}

TEST_CASE("score_backward: chain rule through the sigmoid and MLP") {
  Rng rng(12);
  const auto cloud = random_cloud(16, 13, 1);
  auto p = make_sorter(1, SorterConfig{{6, 5}, 3}, rng);
  const auto nb = geometry::knn(cloud, 3);
  const auto x0 = nn::flatten(p.trainable("s"));
  const nn::Objective f = [&](std::span<const double> x, std::span<double> g) {
    auto q = p;
    nn::unflatten(x, q.trainable("s"));
    const auto sc = score_points(q, cloud, nn::Mode::kTrain, false);
    const auto loss = ordering_loss(sc.values, nb);
    if (!g.empty()) {
      auto back = score_backward(q, sc, loss.grad);
      const auto flat = nn::flatten(back.grads.trainable("s"));
      std::copy(flat.begin(), flat.end(), g.begin());
    }
    return loss.total;
  };
  CHECK(nn::grad_check(f, x0).max_relative_error < 1e-5);
}

TEST_CASE("mode collapse and its prevention") {
  const auto cloud = random_cloud(256, 15);

  const auto run = [&](std::size_t k, double local_weight, double dist_weight) {
    Rng init(16);
    SorterConfig config;
    config.k = k;
    config.local_weight = local_weight;
    config.dist_weight = dist_weight;
    const auto nb = geometry::knn(cloud, k);
    auto p = make_sorter(0, config, init);
    nn::AdamState state{nn::AdamConfig{0.9, 0.999, 1e-8, 0.0}, 0, {}, {}};
    for (int step = 0; step < 500; ++step) {
      auto sc = score_points(p, cloud, nn::Mode::kTrain);
      const auto loss = ordering_loss(sc.values, nb, config);
      auto back = score_backward(p, sc, loss.grad);
      nn::adamw_step(p.trainable("s"), back.grads.trainable("s"), state, 0.01);
    }
    return infer_scores(p, cloud);
  };
  // The locality sum is not divided by k, so its pull against the ramp term
  // grows with k; k = 4 keeps the plain sum balanced.
  CHECK(score_stddev(run(4, 1.0, 0.0)) < 0.01);
  CHECK(score_stddev(run(24, 1.0, 0.0)) < 0.01);
  CHECK(ks_distance_to_uniform(run(4, 1.0, 1.0)) < 0.1);
  CHECK(ks_distance_to_uniform(run(24, 1.0 / 24.0, 1.0)) < 0.1);
}

TEST_CASE("score statistics helpers") {
  CHECK(score_stddev(std::vector<double>{0.5, 0.5, 0.5}) == 0.0);
  CHECK(score_stddev(std::vector<double>{0.0, 1.0}) == doctest::Approx(0.5));
  // Empirical CDF of {0.5}: distance to U(0,1) is 0.5.
  CHECK(ks_distance_to_uniform(std::vector<double>{0.5}) == doctest::Approx(0.5));
  std::vector<double> grid(100);
  for (std::size_t i = 0; i < 100; ++i) grid[i] = (double(i) + 0.5) / 100.0;
  CHECK(ks_distance_to_uniform(grid) == doctest::Approx(0.005));
}

TEST_CASE("SorterConfig validation") {
  SorterConfig c;
  c.k = 0;
  CHECK(error_code_of([&] { c.validate(); }) != ErrorCode{});
  SorterConfig d;
  d.hidden = {64, 0};
  CHECK(error_code_of([&] { d.validate(); }) != ErrorCode{});
}
