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

#include "ptsort/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ptsort/error.hpp"

namespace ptsort::nn {

namespace {

constexpr const char* kFormatTag = "ptsort-checkpoint";

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xFF);
    return r;
  }
}

[[noreturn]] void io_error(const std::string& what) { throw Error(ErrorCode::kIo, what); }

}  // namespace

const StoredTensor& Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  io_error("checkpoint has no tensor named '" + name + "'");
}

void Checkpoint::load_into(const TensorList& targets) const {
  for (const auto& target : targets) {
    const StoredTensor& src = find(target.name);
    if (src.shape != target.shape) {
      io_error("checkpoint tensor '" + target.name + "' has an unexpected shape");
    }
    std::copy(src.values.begin(), src.values.end(), target.values.begin());
  }
}

void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                      const TensorList& tensors) {
  nlohmann::json header;
  header["format"] = kFormatTag;
  header["version"] = kCheckpointVersion;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) {
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot open checkpoint for writing: " + path.string());
  out << header.dump() << '\n';
  for (const auto& t : tensors) {
    for (double v : t.values) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
      char bytes[8];
      std::memcpy(bytes, &bits, 8);
      out.write(bytes, 8);
    }
  }
  if (!out) io_error("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(in, line)) io_error("checkpoint is empty: " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    io_error("checkpoint header is not valid JSON: " + std::string(e.what()));
  }
  if (header.value("format", "") != kFormatTag) io_error("not a ptsort checkpoint");
  if (header.value("version", 0) != kCheckpointVersion) {
    io_error("unsupported checkpoint version");
  }
  Checkpoint ck;
  ck.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    StoredTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::size_t count = 1;
    for (std::size_t d : t.shape) count *= d;
    t.values.resize(count);
    for (double& v : t.values) {
      char bytes[8];
      if (!in.read(bytes, 8)) io_error("checkpoint is truncated: " + path.string());
      std::uint64_t bits;
      std::memcpy(&bits, bytes, 8);
      v = std::bit_cast<double>(to_little(bits));
    }
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

}  // namespace ptsort::nn
