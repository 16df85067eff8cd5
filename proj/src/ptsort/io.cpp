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

#include "ptsort/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ptsort/error.hpp"
#include "ptsort/nn/checkpoint.hpp"
#include "ptsort/rng.hpp"

namespace ptsort::io {

namespace {

constexpr const char* kCloudMagic = "OPTC";
constexpr const char* kCloudVersion = "v1";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

template <typename T>
bool parse_integer(std::string_view text, T& out) {
  text = trim(text);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

[[noreturn]] void cloud_error(const std::string& source, std::size_t line,
                              const std::string& what) {
  throw Error(ErrorCode::kIo, source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_cloud(const geometry::PointCloud& cloud, std::ostream& out) {
  cloud.validate();
  const int c = cloud.has_labels() ? cloud.class_count : 0;
  out << kCloudMagic << ' ' << kCloudVersion << " N=" << cloud.size()
      << " F=" << cloud.feature_count << " C=" << c << '\n';
  for (int i = 0; i < c; ++i) {
    if (i > 0) out << ',';
    out << (cloud.class_names.empty() ? "class" + std::to_string(i) : cloud.class_names[i]);
  }
  out << '\n';
  std::string line;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    line.clear();
    for (int a = 0; a < 3; ++a) {
      if (a > 0) line += ',';
      line += format_double(cloud.positions[i][a]);
    }
    for (double f : cloud.feature_row(i)) {
      line += ',';
      line += format_double(f);
    }
    if (c > 0) {
      line += ',';
      line += std::to_string(cloud.labels[i]);
    }
    line += '\n';
    out << line;
  }
}

void write_cloud(const geometry::PointCloud& cloud, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_cloud(cloud, buf);
  write_text(path, buf.str());
}

geometry::PointCloud read_cloud(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) cloud_error(source, line_no, "missing header");

  std::size_t n = 0, f = 0;
  int c = -1;
  {
    const auto fields = split(trim(line), ' ');
    if (fields.size() != 5 || fields[0] != kCloudMagic) {
      cloud_error(source, line_no, "malformed header, expected 'OPTC v1 N=<n> F=<f> C=<c>'");
    }
    if (fields[1] != kCloudVersion) {
      cloud_error(source, line_no, "unsupported version '" + std::string(fields[1]) + "'");
    }
    const auto field = [&](std::string_view text, std::string_view key, auto& value) {
      if (text.substr(0, key.size()) != key ||
          !parse_integer(text.substr(key.size()), value)) {
        cloud_error(source, line_no, "malformed header field '" + std::string(text) + "'");
      }
    };
    field(fields[2], "N=", n);
    field(fields[3], "F=", f);
    field(fields[4], "C=", c);
    if (n == 0) cloud_error(source, line_no, "N must be at least 1");
    if (c < 0) cloud_error(source, line_no, "C must be nonnegative");
  }

  geometry::PointCloud cloud;
  cloud.feature_count = f;
  cloud.class_count = c > 0 ? c : 1;
  ++line_no;
  if (!std::getline(in, line)) cloud_error(source, line_no, "missing class-name line");
  if (c > 0) {
    for (auto name : split(trim(line), ',')) cloud.class_names.emplace_back(trim(name));
    if (cloud.class_names.size() != static_cast<std::size_t>(c)) {
      cloud_error(source, line_no,
                  "expected " + std::to_string(c) + " class names, found " +
                      std::to_string(cloud.class_names.size()));
    }
  } else if (!trim(line).empty()) {
    cloud_error(source, line_no, "class names given for an unlabeled cloud (C=0)");
  }

  const std::size_t columns = 3 + f + (c > 0 ? 1 : 0);
  cloud.positions.reserve(n);
  cloud.features.reserve(n * f);
  if (c > 0) cloud.labels.reserve(n);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) {
      cloud_error(source, line_no, "blank line inside point rows");
    }
    if (rows == n) {
      cloud_error(source, line_no, "more point rows than the header's N=" + std::to_string(n));
    }
    const auto cells = split(body, ',');
    if (cells.size() != columns) {
      cloud_error(source, line_no,
                  "expected " + std::to_string(columns) + " columns, found " +
                      std::to_string(cells.size()));
    }
    geometry::Vec3 p{};
    for (std::size_t j = 0; j < 3 + f; ++j) {
      double v = 0.0;
      if (!parse_double(cells[j], v)) {
        cloud_error(source, line_no,
                    "column " + std::to_string(j + 1) + " is not a number: '" +
                        std::string(cells[j]) + "'");
      }
      if (!std::isfinite(v)) {
        cloud_error(source, line_no, "column " + std::to_string(j + 1) + " is not finite");
      }
      if (j < 3) {
        p[j] = v;
      } else {
        cloud.features.push_back(v);
      }
    }
    cloud.positions.push_back(p);
    if (c > 0) {
      int label = -1;
      if (!parse_integer(cells.back(), label)) {
        cloud_error(source, line_no, "label is not an integer: '" + std::string(cells.back()) + "'");
      }
      if (label < 0 || label >= c) {
        cloud_error(source, line_no,
                    "label " + std::to_string(label) + " outside [0, " + std::to_string(c) + ")");
      }
      cloud.labels.push_back(label);
    }
    ++rows;
  }
  if (rows != n) {
    cloud_error(source, line_no + 1,
                "header declares N=" + std::to_string(n) + " but file has " +
                    std::to_string(rows) + " point rows");
  }
  return cloud;
}

geometry::PointCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open cloud file " + path.string());
  return read_cloud(in, path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

struct Field {
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  // Returns an empty string on success, otherwise the reason.
  std::function<std::string(RunConfig&, std::string_view)> set;
};

template <typename Getter>
Field size_field(std::string key, std::string doc, Getter ref) {
  return {std::move(key), std::move(doc),
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, std::string_view v) -> std::string {
            std::size_t x = 0;
            if (!parse_integer(v, x)) return "expected a nonnegative integer";
            ref(c) = x;
            return {};
          }};
}

template <typename Getter>
Field int_field(std::string key, std::string doc, Getter ref) {
  return {std::move(key), std::move(doc),
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, std::string_view v) -> std::string {
            int x = 0;
            if (!parse_integer(v, x)) return "expected an integer";
            ref(c) = x;
            return {};
          }};
}

template <typename Getter>
Field u64_field(std::string key, std::string doc, Getter ref) {
  return {std::move(key), std::move(doc),
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, std::string_view v) -> std::string {
            std::uint64_t x = 0;
            if (!parse_integer(v, x)) return "expected an unsigned 64-bit integer";
            ref(c) = x;
            return {};
          }};
}

template <typename Getter>
Field double_field(std::string key, std::string doc, Getter ref) {
  return {std::move(key), std::move(doc),
          [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, std::string_view v) -> std::string {
            double x = 0.0;
            if (!parse_double(v, x)) return "expected a number";
            if (!std::isfinite(x)) return "expected a finite number";
            ref(c) = x;
            return {};
          }};
}

template <typename Getter>
Field bool_field(std::string key, std::string doc, Getter ref) {
  return {std::move(key), std::move(doc),
          [ref](const RunConfig& c) {
            return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false");
          },
          [ref](RunConfig& c, std::string_view v) -> std::string {
            v = trim(v);
            if (v == "true") {
              ref(c) = true;
            } else if (v == "false") {
              ref(c) = false;
            } else {
              return "expected true or false";
            }
            return {};
          }};
}

template <typename Getter>
Field string_field(std::string key, std::string doc, Getter ref) {
  return {std::move(key), std::move(doc),
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); },
          [ref](RunConfig& c, std::string_view v) -> std::string {
            ref(c) = std::string(trim(v));
            return {};
          }};
}

template <typename Getter>
Field string_list_field(std::string key, std::string doc, Getter ref) {
  return {std::move(key), std::move(doc),
          [ref](const RunConfig& c) {
            std::string out;
            for (const auto& s : ref(const_cast<RunConfig&>(c))) {
              if (!out.empty()) out += ", ";
              out += s;
            }
            return out;
          },
          [ref](RunConfig& c, std::string_view v) -> std::string {
            std::vector<std::string> items;
            if (!trim(v).empty()) {
              for (auto part : split(v, ',')) {
                if (trim(part).empty()) return "empty list entry";
                items.emplace_back(trim(part));
              }
            }
            ref(c) = std::move(items);
            return {};
          }};
}

template <typename Getter>
Field size_list_field(std::string key, std::string doc, Getter ref) {
  return {std::move(key), std::move(doc),
          [ref](const RunConfig& c) {
            std::string out;
            for (auto x : ref(const_cast<RunConfig&>(c))) {
              if (!out.empty()) out += ", ";
              out += std::to_string(x);
            }
            return out;
          },
          [ref](RunConfig& c, std::string_view v) -> std::string {
            std::vector<std::size_t> items;
            if (!trim(v).empty()) {
              for (auto part : split(v, ',')) {
                std::size_t x = 0;
                if (!parse_integer(part, x)) return "expected a comma-separated integer list";
                items.push_back(x);
              }
            }
            ref(c) = std::move(items);
            return {};
          }};
}

#define PTSORT_REF(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      u64_field("seed", "master seed for scene generation, initialization and shuffling",
                PTSORT_REF(train.seed)),

      size_field("scene.count", "training scenes generated by gen-scenes", PTSORT_REF(scene_count)),
      size_field("scene.held_out", "held-out scenes generated by gen-scenes",
                 PTSORT_REF(held_out_count)),
      double_field("scene.extent", "side length of the square scene footprint",
                   PTSORT_REF(scene.extent)),
      size_field("scene.ground_planes", "ground patches per scene", PTSORT_REF(scene.ground_planes)),
      size_field("scene.intact_boxes", "undamaged buildings per scene",
                 PTSORT_REF(scene.intact_boxes)),
      size_field("scene.collapsed_boxes", "damaged buildings per scene",
                 PTSORT_REF(scene.collapsed_boxes)),
      size_field("scene.road_strips", "road strips per scene", PTSORT_REF(scene.road_strips)),
      size_field("scene.tree_blobs", "trees per scene", PTSORT_REF(scene.tree_blobs)),
      size_field("scene.points_per_primitive", "points sampled on every primitive",
                 PTSORT_REF(scene.points_per_primitive)),
      double_field("scene.road_aspect", "road length over width, at least 10",
                   PTSORT_REF(scene.road_aspect)),
      double_field("scene.noise_sigma", "Gaussian position jitter", PTSORT_REF(scene.noise_sigma)),
      double_field("scene.color_noise", "Gaussian RGB jitter", PTSORT_REF(scene.color_noise)),

      size_field("train.epochs", "passes over the training scenes", PTSORT_REF(train.epochs)),
      size_field("train.warmup_epochs", "leading epochs serialized by static curves",
                 PTSORT_REF(train.warmup_epochs)),
      double_field("train.lambda", "weight of the ordering loss after warmup",
                   PTSORT_REF(train.lambda)),
      double_field("train.seg_weight", "weight of the segmentation loss (0 freezes the backbone)",
                   PTSORT_REF(train.seg_weight)),
      string_field("train.serialization", "learned, or a fixed curve: z, z-rev, hilbert, hilbert-rev",
                   PTSORT_REF(train.serialization)),
      string_list_field("train.warmup_variants", "curves drawn from during warmup",
                        PTSORT_REF(train.warmup_variants)),
      int_field("train.bits_per_axis", "quantization bits per axis for static curves (1..20)",
                PTSORT_REF(train.bits_per_axis)),
      double_field("train.sorter_max_lr", "peak learning rate of the sorter",
                   PTSORT_REF(train.sorter_max_lr)),
      bool_field("train.shuffle_scenes", "visit scenes in a seeded random order each epoch",
                 PTSORT_REF(train.shuffle_scenes)),
      size_field("train.metric_k", "neighbors per point for retention statistics",
                 PTSORT_REF(train.metric_k)),
      bool_field("train.log_wall_time", "record elapsed seconds in the history (not reproducible)",
                 PTSORT_REF(train.log_wall_time)),
      size_field("train.checkpoint_every", "write a checkpoint every n epochs (0 = final only)",
                 PTSORT_REF(checkpoint_every)),

      size_list_field("sorter.hidden", "hidden widths of the scoring network",
                      PTSORT_REF(train.sorter.hidden)),
      size_field("sorter.k", "neighbors per point in the locality loss", PTSORT_REF(train.sorter.k)),
      double_field("sorter.local_weight", "weight of the locality term",
                   PTSORT_REF(train.sorter.local_weight)),
      double_field("sorter.dist_weight", "weight of the distribution term",
                   PTSORT_REF(train.sorter.dist_weight)),
      bool_field("sorter.one_based_ramp", "uniform ramp i/N over i = 1..N (false: 0..N-1)",
                 PTSORT_REF(train.sorter.one_based_ramp)),

      size_field("backbone.width", "feature width", PTSORT_REF(train.backbone.width)),
      size_field("backbone.heads", "attention heads, must divide the width",
                 PTSORT_REF(train.backbone.heads)),
      size_field("backbone.blocks", "attention blocks", PTSORT_REF(train.backbone.blocks)),
      size_field("backbone.window_size", "points per attention window",
                 PTSORT_REF(train.backbone.window_size)),
      size_field("backbone.ffn_multiplier", "feed-forward hidden width over feature width",
                 PTSORT_REF(train.backbone.ffn_multiplier)),

      double_field("adam.beta1", "first-moment decay", PTSORT_REF(train.adam.beta1)),
      double_field("adam.beta2", "second-moment decay", PTSORT_REF(train.adam.beta2)),
      double_field("adam.epsilon", "denominator offset", PTSORT_REF(train.adam.epsilon)),
      double_field("adam.weight_decay", "decoupled weight decay", PTSORT_REF(train.adam.weight_decay)),

      double_field("schedule.max_lr", "peak learning rate of the backbone",
                   PTSORT_REF(train.schedule.max_lr)),
      double_field("schedule.warmup_fraction", "share of steps spent ramping up",
                   PTSORT_REF(train.schedule.warmup_fraction)),
      double_field("schedule.div_factor", "initial lr = max_lr / div_factor",
                   PTSORT_REF(train.schedule.div_factor)),
      double_field("schedule.final_div_factor", "final lr = max_lr / final_div_factor",
                   PTSORT_REF(train.schedule.final_div_factor)),

      size_list_field("ablation.k_values", "sorter.k values swept by ablate-k",
                      PTSORT_REF(ablation_k)),
      string_list_field("compare.methods", "orderings reported by compare-orders",
                        PTSORT_REF(compare_methods)),
      size_field("compare.k", "neighbors per point for compare-orders retention",
                 PTSORT_REF(compare_k)),
      size_field("grad_check.seeds", "random seeds per gradient check",
                 PTSORT_REF(grad_check_seeds)),
  };
  return table;
}

#undef PTSORT_REF

void config_check(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw Error(ErrorCode::kConfig, key + ": " + rule);
}

}  // namespace

void RunConfig::validate() const {
  config_check(scene.extent > 0.0, "scene.extent", "must be positive");
  config_check(scene.road_aspect >= 10.0, "scene.road_aspect", "must be at least 10");
  config_check(scene.noise_sigma >= 0.0, "scene.noise_sigma", "must be nonnegative");
  config_check(scene.color_noise >= 0.0, "scene.color_noise", "must be nonnegative");
  config_check(scene.points_per_primitive >= 1, "scene.points_per_primitive",
               "must be at least 1");
  config_check(scene.ground_planes + scene.intact_boxes + scene.collapsed_boxes +
                       scene.road_strips + scene.tree_blobs >= 1,
               "scene.*", "at least one primitive is required");
  config_check(scene_count >= 1, "scene.count", "must be at least 1");

  config_check(train.epochs >= 1, "train.epochs", "must be at least 1");
  config_check(train.warmup_epochs <= train.epochs, "train.warmup_epochs",
               "must not exceed train.epochs");
  config_check(train.lambda >= 0.0, "train.lambda", "must be nonnegative");
  config_check(train.seg_weight >= 0.0, "train.seg_weight", "must be nonnegative");
  config_check(train.learned() || [&] {
    try {
      curves::parse_variant(train.serialization);
      return true;
    } catch (const Error&) {
      return false;
    }
  }(), "train.serialization", "must be learned, z, z-rev, hilbert or hilbert-rev");
  config_check(!train.warmup_variants.empty(), "train.warmup_variants", "must not be empty");
  for (const auto& v : train.warmup_variants) {
    try {
      curves::parse_variant(v);
    } catch (const Error&) {
      config_check(false, "train.warmup_variants", "unknown curve '" + v + "'");
    }
  }
  config_check(train.bits_per_axis >= 1 && train.bits_per_axis <= curves::kMaxBitsPerAxis,
               "train.bits_per_axis", "must lie in [1, 20]");
  config_check(train.sorter_max_lr > 0.0, "train.sorter_max_lr", "must be positive");
  config_check(train.metric_k >= 1, "train.metric_k", "must be at least 1");

  config_check(!train.sorter.hidden.empty(), "sorter.hidden", "needs at least one layer");
  for (auto h : train.sorter.hidden) config_check(h >= 1, "sorter.hidden", "widths must be >= 1");
  config_check(train.sorter.k >= 1, "sorter.k", "must be at least 1 (k >= 1)");
  config_check(train.sorter.local_weight >= 0.0, "sorter.local_weight", "must be nonnegative");
  config_check(train.sorter.dist_weight >= 0.0, "sorter.dist_weight", "must be nonnegative");

  config_check(train.backbone.width >= 1, "backbone.width", "must be at least 1");
  config_check(train.backbone.heads >= 1 && train.backbone.width % train.backbone.heads == 0,
               "backbone.heads", "must be at least 1 and divide backbone.width");
  config_check(train.backbone.blocks >= 1, "backbone.blocks", "must be at least 1");
  config_check(train.backbone.window_size >= 1, "backbone.window_size", "must be at least 1");
  config_check(train.backbone.ffn_multiplier >= 1, "backbone.ffn_multiplier",
               "must be at least 1");

  config_check(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0, "adam.beta1",
               "must lie in [0, 1)");
  config_check(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0, "adam.beta2",
               "must lie in [0, 1)");
  config_check(train.adam.epsilon > 0.0, "adam.epsilon", "must be positive");
  config_check(train.adam.weight_decay >= 0.0, "adam.weight_decay", "must be nonnegative");

  config_check(train.schedule.max_lr > 0.0, "schedule.max_lr", "must be positive");
  config_check(train.schedule.warmup_fraction >= 0.0 && train.schedule.warmup_fraction <= 1.0,
               "schedule.warmup_fraction", "must lie in [0, 1]");
  config_check(train.schedule.div_factor >= 1.0, "schedule.div_factor", "must be at least 1");
  config_check(train.schedule.final_div_factor >= 1.0, "schedule.final_div_factor",
               "must be at least 1");

  config_check(!ablation_k.empty(), "ablation.k_values", "must not be empty");
  for (auto k : ablation_k) config_check(k >= 1, "ablation.k_values", "every k must be >= 1");
  config_check(!compare_methods.empty(), "compare.methods", "must not be empty");
  for (const auto& m : compare_methods) {
    if (m == train::kLearned) continue;
    try {
      curves::parse_variant(m);
    } catch (const Error&) {
      config_check(false, "compare.methods", "unknown ordering '" + m + "'");
    }
  }
  config_check(compare_k >= 1, "compare.k", "must be at least 1");
  config_check(grad_check_seeds >= 1, "grad_check.seeds", "must be at least 1");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

namespace {

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw Error(ErrorCode::kConfig, "unknown key '" + key + "'");
}

}  // namespace

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const Field& field = find_field(key);
  RunConfig candidate = config;
  const std::string problem = field.set(candidate, value);
  if (!problem.empty()) {
    throw Error(ErrorCode::kConfig, key + ": " + problem + ", got '" + value + "'");
  }
  candidate.validate();
  config = std::move(candidate);
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
  return find_field(key).get(config);
}

std::vector<geometry::PointCloud> generate_scenes(const RunConfig& config, std::size_t first,
                                                  std::size_t count) {
  constexpr std::uint64_t kSceneStream = 0x5CE7E5ULL;
  std::vector<geometry::PointCloud> scenes;
  scenes.reserve(count);
  for (std::size_t i = first; i < first + count; ++i) {
    geometry::SceneConfig scene = config.scene;
    scene.seed = splitmix64(config.train.seed ^ kSceneStream) + i;
    scenes.push_back(geometry::generate_scene(scene));
  }
  return scenes;
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;

  RunConfig config;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  const auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::kConfig, where() + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfig, where() + "expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    if (!section.empty()) key = section + "." + key;
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw Error(ErrorCode::kConfig, where() + "unknown key '" + key + "'");
    if (!seen.insert(key).second) {
      throw Error(ErrorCode::kConfig, where() + "duplicate key '" + key + "'");
    }
    const std::string problem = it->second->set(config, line.substr(eq + 1));
    if (!problem.empty()) {
      throw Error(ErrorCode::kConfig,
                  where() + key + ": " + problem + ", got '" +
                      std::string(trim(line.substr(eq + 1))) + "'");
    }
  }
  config.validate();
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

std::string render_config(const RunConfig& config) {
  std::string out = "# effective configuration, every key listed\n";
  for (const auto& f : fields()) {
    out += "\n# " + f.doc + "\n" + f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kModelKind = "model";
constexpr const char* kSorterKind = "sorter";

nlohmann::json sorter_meta(const nn::MlpParams& sorter) {
  return {{"dims", sorter.dims}, {"batch_norm", sorter.batch_norm}};
}

nn::MlpParams empty_sorter(const nlohmann::json& meta) {
  const auto dims = meta.at("dims").get<std::vector<std::size_t>>();
  Rng rng(0);
  return nn::make_mlp(dims, meta.at("batch_norm").get<bool>(), rng);
}

nn::TensorList sorter_tensors(nn::MlpParams& sorter) {
  auto list = sorter.trainable("sorter");
  auto buffers = sorter.buffers("sorter");
  list.insert(list.end(), buffers.begin(), buffers.end());
  return list;
}

template <typename F>
auto checkpoint_guard(const std::filesystem::path& path, F&& body) {
  try {
    return body();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, "checkpoint " + path.string() + " has bad metadata: " + e.what());
  }
}

}  // namespace

void save_model(const train::TrainedModel& model, const std::filesystem::path& path) {
  train::TrainedModel copy = model;
  const auto& bb = copy.backbone;
  require(!bb.blocks.empty(), "model has no attention blocks");
  const std::size_t width = bb.embed.output_width();
  nlohmann::json meta{
      {"kind", kModelKind},
      {"serialization", copy.serialization},
      {"bits_per_axis", copy.bits_per_axis},
      {"feature_count", copy.feature_count},
      {"class_count", bb.class_count},
      {"class_names", copy.class_names},
      {"backbone",
       {{"width", width},
        {"heads", bb.blocks.front().attention.heads},
        {"blocks", bb.blocks.size()},
        {"window_size", bb.window_size},
        {"ffn_multiplier", bb.blocks.front().ffn.up.weight.cols() / width}}},
      {"sorter", sorter_meta(copy.sorter)}};
  auto tensors = copy.backbone.trainable();
  auto buffers = copy.backbone.buffers();
  tensors.insert(tensors.end(), buffers.begin(), buffers.end());
  auto sorter = sorter_tensors(copy.sorter);
  tensors.insert(tensors.end(), sorter.begin(), sorter.end());
  nn::write_checkpoint(path, meta, tensors);
}

train::TrainedModel load_model(const std::filesystem::path& path) {
  const auto ckpt = nn::read_checkpoint(path);
  return checkpoint_guard(path, [&] {
    const auto& meta = ckpt.meta;
    if (meta.at("kind").get<std::string>() != kModelKind) {
      throw Error(ErrorCode::kIo, path.string() + " is not a model checkpoint");
    }
    train::TrainedModel model;
    model.serialization = meta.at("serialization").get<std::string>();
    model.bits_per_axis = meta.at("bits_per_axis").get<int>();
    model.feature_count = meta.at("feature_count").get<std::size_t>();
    model.class_names = meta.at("class_names").get<std::vector<std::string>>();
    backbone::BackboneConfig cfg;
    const auto& b = meta.at("backbone");
    cfg.width = b.at("width").get<std::size_t>();
    cfg.heads = b.at("heads").get<std::size_t>();
    cfg.blocks = b.at("blocks").get<std::size_t>();
    cfg.window_size = b.at("window_size").get<std::size_t>();
    cfg.ffn_multiplier = b.at("ffn_multiplier").get<std::size_t>();
    Rng rng(0);
    model.backbone =
        backbone::make_model(model.feature_count, meta.at("class_count").get<int>(), cfg, rng);
    model.sorter = empty_sorter(meta.at("sorter"));
    auto tensors = model.backbone.trainable();
    auto buffers = model.backbone.buffers();
    tensors.insert(tensors.end(), buffers.begin(), buffers.end());
    auto sorter = sorter_tensors(model.sorter);
    tensors.insert(tensors.end(), sorter.begin(), sorter.end());
    ckpt.load_into(tensors);
    return model;
  });
}

void save_sorter(const nn::MlpParams& sorter, const std::filesystem::path& path) {
  nn::MlpParams copy = sorter;
  nlohmann::json meta{{"kind", kSorterKind}, {"sorter", sorter_meta(copy)}};
  nn::write_checkpoint(path, meta, sorter_tensors(copy));
}

nn::MlpParams load_sorter(const std::filesystem::path& path) {
  const auto ckpt = nn::read_checkpoint(path);
  return checkpoint_guard(path, [&] {
    const auto kind = ckpt.meta.at("kind").get<std::string>();
    if (kind != kSorterKind && kind != kModelKind) {
      throw Error(ErrorCode::kIo, path.string() + ": unknown checkpoint kind '" + kind + "'");
    }
    nn::MlpParams sorter = empty_sorter(ckpt.meta.at("sorter"));
    // Model checkpoints also carry backbone tensors; only sorter names are read.
    ckpt.load_into(sorter_tensors(sorter));
    return sorter;
  });
}

}  // namespace ptsort::io
