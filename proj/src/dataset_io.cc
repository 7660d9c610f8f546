// Copyright 2026 The NMoE Simulator Authors
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

// Container layout (all integers little-endian):
//   8 bytes  magic "NMOEDSET"
//   u32      version (1)
//   u64      header length H
//   H bytes  JSON header {"rows", "dim", "num_classes", "provenance"}
//   rows x i32      labels
//   rows*dim x f64  features, row-major

#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "nmoe/datasets.h"
#include "nmoe/error.h"

namespace nmoe {
namespace {

constexpr char kMagic[8] = {'N', 'M', 'O', 'E', 'D', 'S', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void WritePod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  Require(in.good(), ErrorCode::kFormat, path.string() + ": truncated");
  return v;
}

}  // namespace

void SaveDataset(const Dataset& data, const std::filesystem::path& path,
                 const std::string& provenance_json) {
  data.Validate();
  nlohmann::json header = {
      {"rows", data.size()},
      {"dim", data.dim()},
      {"num_classes", data.num_classes},
      {"provenance", nlohmann::json::parse(provenance_json)},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.is_open(), ErrorCode::kIo, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  WritePod(out, kVersion);
  WritePod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (int y : data.labels) WritePod(out, static_cast<std::int32_t>(y));
  const auto f = data.features.data();
  out.write(reinterpret_cast<const char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(double)));
  Require(out.good(), ErrorCode::kIo, "short write to " + path.string());
}

LoadedDataset LoadDataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.is_open(), ErrorCode::kIo, "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  Require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          ErrorCode::kFormat, path.string() + ": not a dataset container");
  const auto version = ReadPod<std::uint32_t>(in, path);
  Require(version == kVersion, ErrorCode::kFormat,
          path.string() + ": unsupported version " + std::to_string(version));
  const auto header_len = ReadPod<std::uint64_t>(in, path);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  Require(in.good(), ErrorCode::kFormat, path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kFormat, path.string() + ": bad header: " + e.what());
  }
  const std::size_t rows = header.at("rows").get<std::size_t>();
  const std::size_t dim = header.at("dim").get<std::size_t>();
  LoadedDataset loaded;
  loaded.data.num_classes = header.at("num_classes").get<int>();
  loaded.provenance_json = header.at("provenance").dump();
  loaded.data.labels.resize(rows);
  for (auto& y : loaded.data.labels) y = ReadPod<std::int32_t>(in, path);
  std::vector<double> values(rows * dim);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  Require(in.good(), ErrorCode::kFormat, path.string() + ": truncated data");
  loaded.data.features = Tensor2(rows, dim, std::move(values));
  loaded.data.Validate();
  return loaded;
}

}  // namespace nmoe
