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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ptsort/geometry.hpp"
#include "ptsort/train.hpp"

namespace ptsort::io {

// Cloud text format:
//   OPTC v1 N=<n> F=<f> C=<c>
//   <class names, comma separated; empty line when C=0>
//   x,y,z[,f1..fF][,label]        one line per point
// C=0 marks an unlabeled cloud. Numbers carry 17 significant digits so a
// write/read cycle reproduces every double exactly.
void write_cloud(const geometry::PointCloud& cloud, std::ostream& out);
void write_cloud(const geometry::PointCloud& cloud, const std::filesystem::path& path);
geometry::PointCloud read_cloud(std::istream& in, const std::string& source = "<stream>");
geometry::PointCloud read_cloud(const std::filesystem::path& path);

/// Every tunable of a run: scene generation, training, and the reporting
/// subcommands.
struct RunConfig {
  geometry::SceneConfig scene;
  std::size_t scene_count = 8;
  std::size_t held_out_count = 2;
  train::TrainConfig train;
  std::size_t checkpoint_every = 0;
  std::vector<std::size_t> ablation_k{4, 8, 16, 24, 32};
  std::vector<std::string> compare_methods{"learned", "z", "z-rev", "hilbert", "hilbert-rev"};
  std::size_t compare_k = 8;
  std::size_t grad_check_seeds = 20;

  /// Range checks every field; throws Error(kConfig) naming the key.
  void validate() const;
};

// Config text: `key = value` lines, `#` comments, optional `[section]`
// headers that prefix later keys (`[sorter]` then `k = 24` is `sorter.k`).
// Unknown keys, duplicate keys and malformed values are errors.
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
RunConfig parse_config(const std::filesystem::path& path);

/// Fully expanded config with one documented line per key; parses back to
/// the same RunConfig.
std::string render_config(const RunConfig& config);

std::vector<std::string> config_keys();

/// Sets one key from its text form and revalidates; Error(kConfig) on an
/// unknown key, a malformed value or a failed range check.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

/// Scenes [first, first + count) of the generator stream seeded by
/// config.train.seed; scene i uses its own derived seed, so any subrange is
/// reproducible on its own.
std::vector<geometry::PointCloud> generate_scenes(const RunConfig& config, std::size_t first,
                                                  std::size_t count);

// Checkpoints. A model checkpoint holds the backbone and the sorter; a sorter
// checkpoint holds the sorter alone. Both use the nn checkpoint container.
void save_model(const train::TrainedModel& model, const std::filesystem::path& path);
train::TrainedModel load_model(const std::filesystem::path& path);
void save_sorter(const nn::MlpParams& sorter, const std::filesystem::path& path);
/// Accepts either kind of checkpoint and returns its sorter.
nn::MlpParams load_sorter(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// `%.17g` through std::to_chars: locale independent and lossless.
std::string format_double(double value);

}  // namespace ptsort::io
