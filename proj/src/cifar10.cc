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

#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "nmoe/datasets.h"
#include "nmoe/error.h"

namespace nmoe {
namespace {

constexpr int kCifarClasses = 10;

std::vector<unsigned char> ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.is_open(), ErrorCode::kIo,
          "cannot open CIFAR-10 batch " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset LoadCifar10(std::span<const std::filesystem::path> paths) {
  std::vector<unsigned char> bytes;
  for (const auto& path : paths) {
    const auto chunk = ReadAll(path);
    Require(chunk.size() % kCifarRecordBytes == 0 && !chunk.empty(),
            ErrorCode::kFormat,
            path.string() + ": size " + std::to_string(chunk.size()) +
                " is not a positive multiple of " +
                std::to_string(kCifarRecordBytes));
    bytes.insert(bytes.end(), chunk.begin(), chunk.end());
  }
  Require(!bytes.empty(), ErrorCode::kData, "no CIFAR-10 batches given");
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  Dataset data;
  data.num_classes = kCifarClasses;
  data.labels.resize(n);
  data.features = Tensor2(n, kCifarImageBytes);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* record = bytes.data() + i * kCifarRecordBytes;
    Require(record[0] < kCifarClasses, ErrorCode::kFormat,
            "record " + std::to_string(i) + " has label byte " +
                std::to_string(record[0]));
    data.labels[i] = record[0];
    auto row = data.features.row(i);
    for (std::size_t j = 0; j < kCifarImageBytes; ++j) {
      row[j] = static_cast<double>(record[1 + j]) / 255.0;
    }
  }
  return data;
}

Dataset LoadCifar10(const std::filesystem::path& path) {
  const std::filesystem::path one[] = {path};
  return LoadCifar10(one);
}

void WriteCifar10(const Dataset& data, const std::filesystem::path& path) {
  data.Validate();
  Require(data.dim() == kCifarImageBytes, ErrorCode::kData,
          "CIFAR-10 records need 3072 features");
  std::vector<unsigned char> bytes(data.size() * kCifarRecordBytes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    Require(data.labels[i] < kCifarClasses, ErrorCode::kData,
            "CIFAR-10 labels must be < 10");
    unsigned char* record = bytes.data() + i * kCifarRecordBytes;
    record[0] = static_cast<unsigned char>(data.labels[i]);
    const auto row = data.features.row(i);
    for (std::size_t j = 0; j < kCifarImageBytes; ++j) {
      const double v = std::round(row[j] * 255.0);
      Require(v >= 0.0 && v <= 255.0, ErrorCode::kData,
              "CIFAR-10 features must lie in [0, 1]");
      record[1 + j] = static_cast<unsigned char>(v);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.is_open(), ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  Require(out.good(), ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace nmoe
