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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "ptsort/nn/checkpoint.hpp"
#include "ptsort/nn/losses.hpp"
#include "ptsort/nn/matrix.hpp"
#include "ptsort/nn/mlp.hpp"
#include "ptsort/nn/optim.hpp"
#include "ptsort/nn/tensor.hpp"
#include "unit/helpers.hpp"

using namespace ptsort;
using namespace ptsort::nn;
using ptsort::testing::error_code_of;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(-scale, scale);
  return m;
}

long double gelu_oracle(long double x) {
  const long double k = std::sqrt(2.0L / std::numbers::pi_v<long double>);
  return 0.5L * x * (1.0L + std::tanh(k * (x + 0.044715L * x * x * x)));
}

// Straight-line forward written independently of the library kernels.
std::vector<std::vector<long double>> forward_oracle(const MlpParams& p, const Matrix& in,
                                                     bool train) {
  const std::size_t n = in.rows();
  std::vector<std::vector<long double>> x(n);
  for (std::size_t r = 0; r < n; ++r) x[r].assign(in.row(r).begin(), in.row(r).end());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    std::vector<std::vector<long double>> z(n, std::vector<long double>(L.weight.cols(), 0.0L));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t o = 0; o < L.weight.cols(); ++o) {
        long double s = L.bias.empty() ? 0.0L : L.bias[o];
        for (std::size_t i = 0; i < L.weight.rows(); ++i) s += x[r][i] * L.weight(i, o);
        z[r][o] = s;
      }
    const bool hidden = l + 1 < p.layers.size();
    if (hidden) {
      for (std::size_t o = 0; o < L.weight.cols(); ++o) {
        long double mean = 0, var = 0;
        if (train) {
          for (std::size_t r = 0; r < n; ++r) mean += z[r][o];
          mean /= n;
          for (std::size_t r = 0; r < n; ++r) var += (z[r][o] - mean) * (z[r][o] - mean);
          var /= n;
        } else {
          mean = p.norms[l].running_mean[o];
          var = p.norms[l].running_var[o];
        }
        for (std::size_t r = 0; r < n; ++r) {
          const long double h = (z[r][o] - mean) / std::sqrt(var + 1e-5L);
          z[r][o] = gelu_oracle(p.norms[l].gain[o] * h + p.norms[l].shift[o]);
        }
      }
    }
    x = std::move(z);
  }
  return x;
}

MlpParams randomized_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
  auto p = make_mlp(dims, true, rng);
  for (auto& bn : p.norms) {
    for (auto& g : bn.gain) g = rng.uniform(0.5, 1.5);
    for (auto& s : bn.shift) s = rng.uniform(-0.3, 0.3);
    for (auto& m : bn.running_mean) m = rng.uniform(-0.2, 0.2);
    for (auto& v : bn.running_var) v = rng.uniform(0.5, 2.0);
  }
  return p;
}

}  // namespace

TEST_CASE("matrix kernels match naive loops") {
  Rng rng(1);
  const auto a = random_matrix(4, 3, rng), b = random_matrix(3, 5, rng);
  const auto c = random_matrix(4, 5, rng);
  const auto ab = matmul(a, b);
  const auto atc = matmul_at_b(a, c);
  const auto cbt = matmul_a_bt(c, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      CHECK(ab(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a(k, i) * c(k, j);
      CHECK(atc(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += c(i, k) * b(j, k);
      CHECK(cbt(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  const std::vector<std::size_t> rows{2, 0};
  const auto g = gather_rows(a, rows);
  CHECK(g.rows() == 2);
  CHECK(g(0, 1) == a(2, 1));
  CHECK(g(1, 2) == a(0, 2));
  CHECK(error_code_of([&] { matmul(a, a); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("mlp_forward: zero weights in eval mode output the final bias") {
  Rng rng(2);
  auto p = make_mlp({4, 6, 6, 2}, true, rng);
  for (auto& L : p.layers) {
    for (double& w : L.weight.values()) w = 0.0;
    for (double& b : L.bias) b = 0.0;
  }
  p.layers.back().bias = {0.25, -1.5};
  const auto out = mlp_forward(p, random_matrix(5, 4, rng), Mode::kEval).outputs;
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(out(r, 0) == 0.25);
    CHECK(out(r, 1) == -1.5);
  }
}

TEST_CASE("mlp_forward: identity single layer") {
  Rng rng(3);
  auto p = make_mlp({3, 3}, true, rng);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) p.layers[0].weight(i, j) = i == j ? 1.0 : 0.0;
  p.layers[0].bias.assign(3, 0.0);
  const auto in = random_matrix(6, 3, rng);
  CHECK(mlp_forward(p, in, Mode::kTrain).outputs == in);
}

TEST_CASE("mlp_forward: matches a straight-line oracle to 1e-12") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    auto p = randomized_mlp({5, 7, 6, 3}, rng);
    const auto in = random_matrix(8, 5, rng);
    for (bool train : {true, false}) {
      auto copy = p;
      const auto out = mlp_forward(copy, in, train ? Mode::kTrain : Mode::kEval).outputs;
      const auto ref = forward_oracle(p, in, train);
      for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 3; ++c)
          CHECK(std::abs(out(r, c) - static_cast<double>(ref[r][c])) < 1e-12);
    }
  }
}

TEST_CASE("mlp_forward: eval leaves running stats untouched and is repeatable") {
  Rng rng(4);
  auto p = randomized_mlp({3, 4, 2}, rng);
  const auto in = random_matrix(5, 3, rng);
  const auto before = p.norms[0].running_mean;
  const auto a = mlp_forward(p, in, Mode::kEval).outputs;
  const auto b = mlp_forward(p, in, Mode::kEval).outputs;
  CHECK(a == b);
  CHECK(p.norms[0].running_mean == before);
  CHECK(mlp_infer(p, in) == a);
  mlp_forward(p, in, Mode::kTrain, /*update_running_stats=*/false);
  CHECK(p.norms[0].running_mean == before);
  mlp_forward(p, in, Mode::kTrain);
  CHECK(p.norms[0].running_mean != before);
}

TEST_CASE("mlp_forward: train mode needs two rows; shape errors") {
  Rng rng(5);
  auto p = make_mlp({3, 4, 2}, true, rng);
  CHECK(error_code_of([&] { mlp_forward(p, random_matrix(1, 3, rng), Mode::kTrain); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(error_code_of([&] { mlp_forward(p, random_matrix(4, 2, rng), Mode::kEval); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("mlp_backward: zero upstream gradient gives zero gradients") {
  Rng rng(6);
  auto p = randomized_mlp({4, 5, 3}, rng);
  const auto fwd = mlp_forward(p, random_matrix(6, 4, rng), Mode::kTrain);
  auto back = mlp_backward(p, fwd.cache, Matrix(6, 3));
  for (const auto& t : back.grads.trainable("g")) {
    for (double v : t.values) CHECK(v == 0.0);
  }
  for (double v : back.grad_inputs.values()) CHECK(v == 0.0);
}

TEST_CASE("mlp_backward: single linear layer with L = sum(outputs)") {
  Rng rng(7);
  auto p = make_mlp({3, 2}, true, rng);
  const auto in = random_matrix(5, 3, rng);
  const auto fwd = mlp_forward(p, in, Mode::kTrain);
  const auto back = mlp_backward(p, fwd.cache, Matrix(5, 2, 1.0));
  for (std::size_t i = 0; i < 3; ++i) {
    double col = 0;
    for (std::size_t r = 0; r < 5; ++r) col += in(r, i);
    CHECK(back.grads.layers[0].weight(i, 0) == doctest::Approx(col).epsilon(1e-14));
    CHECK(back.grads.layers[0].weight(i, 1) == doctest::Approx(col).epsilon(1e-14));
  }
  CHECK(back.grads.layers[0].bias[0] == 5.0);
  CHECK(back.grads.layers[0].bias[1] == 5.0);
}

TEST_CASE("mlp_backward: finite differences on a random 3-layer net") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(300 + seed);
    auto p = randomized_mlp({4, 6, 5, 2}, rng);
    const auto in = random_matrix(7, 4, rng);
    const auto upstream = random_matrix(7, 2, rng);
    auto params = p.trainable("p");
    const auto x0 = flatten(params);
    const Objective f = [&](std::span<const double> x, std::span<double> grad) {
      auto q = p;
      auto views = q.trainable("p");
      unflatten(x, views);
      auto fwd = mlp_forward(q, in, Mode::kTrain, false);
      long double s = 0;
      for (std::size_t i = 0; i < upstream.size(); ++i)
        s += static_cast<long double>(fwd.outputs.values()[i]) * upstream.values()[i];
      if (!grad.empty()) {
        auto back = mlp_backward(q, fwd.cache, upstream);
        const auto g = flatten(back.grads.trainable("p"));
        std::copy(g.begin(), g.end(), grad.begin());
      }
      return static_cast<double>(s);
    };
    const auto r = grad_check(f, x0);
    CAPTURE(seed);
    CHECK(r.max_relative_error < 1e-6);
  }
}

TEST_CASE("softmax_cross_entropy fixtures") {
  Matrix uniform(3, 5, 0.7);
  const std::vector<int> labels{0, 3, 4};
  CHECK(softmax_cross_entropy(uniform, labels).loss ==
        doctest::Approx(std::log(5.0)).epsilon(1e-14));

  Matrix confident(1, 5, 0.0);
  confident(0, 2) = 30.0;
  CHECK(softmax_cross_entropy(confident, std::vector<int>{2}).loss < 1e-9);

  Rng rng(8);
  const auto logits = random_matrix(4, 5, rng, 3.0);
  const std::vector<int> y{1, 0, 4, 2};
  auto shifted = logits;
  for (std::size_t r = 0; r < 4; ++r)
    for (double& v : shifted.row(r)) v += 17.0 * double(r + 1);
  CHECK(std::abs(softmax_cross_entropy(shifted, y).loss - softmax_cross_entropy(logits, y).loss) <
        1e-9);

  const auto x0 = std::vector<double>(logits.values().begin(), logits.values().end());
  const Objective f = [&](std::span<const double> x, std::span<double> grad) {
    Matrix m(4, 5);
    std::copy(x.begin(), x.end(), m.values().begin());
    auto r = softmax_cross_entropy(m, y);
    if (!grad.empty()) std::copy(r.grad.values().begin(), r.grad.values().end(), grad.begin());
    return r.loss;
  };
  CHECK(grad_check(f, x0).max_relative_error < 1e-6);

  CHECK(error_code_of([&] { softmax_cross_entropy(logits, std::vector<int>{0, 1, 5, 0}); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("grad_check: quadratic is exact, a doubled gradient scores one third") {
  const Objective square = [](std::span<const double> x, std::span<double> g) {
    if (!g.empty()) g[0] = 2 * x[0];
    return x[0] * x[0];
  };
  CHECK(grad_check(square, std::vector<double>{3.0}).max_relative_error < 1e-10);

  const Objective wrong = [](std::span<const double> x, std::span<double> g) {
    if (!g.empty()) g[0] = 4 * x[0];
    return x[0] * x[0];
  };
  const auto r = grad_check(wrong, std::vector<double>{3.0});
  CHECK(r.max_relative_error == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
  CHECK(r.analytic == 12.0);

  const Objective bad = [](std::span<const double> x, std::span<double> g) {
    if (!g.empty()) g[0] = 1.0;
    return x[0] > 1.0 ? std::nan("") : x[0];
  };
  CHECK(error_code_of([&] { grad_check(bad, std::vector<double>{1.0}); }) ==
        ErrorCode::kNumeric);
}

TEST_CASE("gelu derivative agrees with differences") {
  for (double x = -4.0; x <= 4.0; x += 0.37) {
    const double h = 1e-6;
    const double fd = (gelu(x + h) - gelu(x - h)) / (2 * h);
    CHECK(gelu_derivative(x) == doctest::Approx(fd).epsilon(1e-8));
    CHECK(gelu(x) == doctest::Approx(double(gelu_oracle(x))).epsilon(1e-15));
  }
}

TEST_CASE("adamw: fixed point, sign step, elementwise independence") {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
  AdamState state{AdamConfig{0.9, 0.999, 1e-8, 0.0}, 0, {}, {}};
  TensorList params{{"p", {2}, p}}, grads{{"g", {2}, g}};
  adamw_step(params, grads, state, 0.1);
  CHECK(p == std::vector<double>{1.0, -2.0});
  CHECK(state.step == 1);

  std::vector<double> q{0.5}, dq{3.0};
  AdamState s2{AdamConfig{0.9, 0.999, 1e-8, 0.0}, 0, {}, {}};
  adamw_step({{"q", {1}, q}}, {{"dq", {1}, dq}}, s2, 0.01);
  CHECK(q[0] == doctest::Approx(0.5 - 0.01).epsilon(1e-7));

  // Decoupled decay acts even with zero gradient.
  std::vector<double> w{2.0}, dw{0.0};
  AdamState s3{AdamConfig{0.9, 0.999, 1e-8, 0.5}, 0, {}, {}};
  adamw_step({{"w", {1}, w}}, {{"dw", {1}, dw}}, s3, 0.1);
  CHECK(w[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0).epsilon(1e-15));

  // Two scalars separately vs batched.
  std::vector<double> a{0.3}, b{-0.7}, ab{0.3, -0.7};
  AdamState sa, sb, sab;
  for (int step = 0; step < 5; ++step) {
    std::vector<double> ga{a[0] * 2 - 0.1}, gb{b[0] * 3 + 0.2};
    std::vector<double> gab{ab[0] * 2 - 0.1, ab[1] * 3 + 0.2};
    adamw_step({{"a", {1}, a}}, {{"ga", {1}, ga}}, sa, 0.01);
    adamw_step({{"b", {1}, b}}, {{"gb", {1}, gb}}, sb, 0.01);
    adamw_step({{"ab", {2}, ab}}, {{"gab", {2}, gab}}, sab, 0.01);
  }
  CHECK(ab[0] == a[0]);
  CHECK(ab[1] == b[0]);

  std::vector<double> bad{1.0};
  CHECK(error_code_of([&] { adamw_step(params, {{"x", {1}, bad}}, state, 0.1); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(error_code_of([&] { adamw_step(params, grads, state, 0.0); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("one_cycle_lr: fixtures and envelope") {
  OneCycleConfig c;
  const std::uint64_t total = 1000;
  CHECK(one_cycle_lr(0, total, c) == doctest::Approx(0.00024).epsilon(1e-12));
  CHECK(one_cycle_lr(100, total, c) == 0.006);
  CHECK(one_cycle_lr(total, total, c) == doctest::Approx(0.006 / 1000.0).epsilon(1e-12));
  double prev = 0.0;
  for (std::uint64_t s = 0; s <= total; ++s) {
    const double lr = one_cycle_lr(s, total, c);
    CHECK(lr <= c.max_lr);
    CHECK(lr > 0.0);
    if (s <= 100) CHECK(lr >= prev);
    if (s > 100) CHECK(lr <= prev);
    // Continuity: no jumps beyond the largest cosine slope.
    if (s > 0) CHECK(std::abs(lr - prev) < 0.006 * std::numbers::pi / 2 / 100 * 1.01);
    prev = lr;
  }
  CHECK(error_code_of([&] { one_cycle_lr(1001, total, c); }) == ErrorCode::kInvalidArgument);
  OneCycleConfig bad = c;
  bad.div_factor = 1.0;
  CHECK(error_code_of([&] { one_cycle_lr(0, total, bad); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("checkpoint: write/read round-trip is bit exact") {
  Rng rng(9);
  auto p = randomized_mlp({3, 4, 2}, rng);
  p.layers[0].weight(0, 0) = -0.0;
  p.layers[1].weight(1, 1) = 1e-310;  // subnormal
  auto tensors = p.trainable("m");
  for (auto& t : p.buffers("m")) tensors.push_back(t);
  const auto dir = std::filesystem::temp_directory_path() / "ptsort_unit_nn";
  std::filesystem::create_directories(dir);
  const auto path = dir / "mlp.ckpt";
  write_checkpoint(path, {{"kind", "test"}}, tensors);

  const auto ckpt = read_checkpoint(path);
  CHECK(ckpt.meta.at("kind") == "test");
  auto q = zeros_like(p);
  auto targets = q.trainable("m");
  for (auto& t : q.buffers("m")) targets.push_back(t);
  ckpt.load_into(targets);
  CHECK(flatten(targets) == flatten(tensors));
  CHECK(std::signbit(q.layers[0].weight(0, 0)));

  // Shape mismatch and truncation are rejected.
  auto wrong = make_mlp({3, 5, 2}, true, rng);
  CHECK(error_code_of([&] { ckpt.load_into(wrong.trainable("m")); }) != ErrorCode{});
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  CHECK(error_code_of([&] { read_checkpoint(path); }) == ErrorCode::kIo);
  std::filesystem::remove_all(dir);
}
