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

#ifndef NMOE_DATASETS_H_
#define NMOE_DATASETS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "nmoe/tensor.h"

namespace nmoe {

struct Dataset {
  Tensor2 features;         // n x d
  std::vector<int> labels;  // length n
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  // Throws kData on empty data, length mismatch or out-of-range labels.
  void Validate() const;

  Dataset Subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;
};

// Pools several datasets with the same dimension and class count.
Dataset Concat(std::span<const Dataset> parts);

// One client's local data.
struct Shard {
  std::size_t client_id = 0;
  Dataset train;
  Dataset test;
  int dominant_class = 0;
  // Indices into the pool the shard was drawn from.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

// Class-conditional isotropic Gaussians around means placed on a sphere.
struct SyntheticSpec {
  int num_classes = 10;
  std::size_t dim = 16;
  std::size_t samples_per_class = 4000;
  double spread = 1.0;  // per-coordinate standard deviation
  double radius = 3.0;  // norm of every class mean
};

Dataset GenSynthetic(const SyntheticSpec& spec, std::uint64_t seed);

// The class means GenSynthetic uses for (spec, seed); exposed for oracles.
Tensor2 SyntheticMeans(const SyntheticSpec& spec, std::uint64_t seed);

// CIFAR-10 binary batches: records of one label byte followed by 3072 pixel
// bytes (1024 R, 1024 G, 1024 B). Pixels are scaled to [0, 1].
inline constexpr std::size_t kCifarImageBytes = 3072;
inline constexpr std::size_t kCifarRecordBytes = 3073;

Dataset LoadCifar10(const std::filesystem::path& path);
Dataset LoadCifar10(std::span<const std::filesystem::path> paths);
// Inverse of LoadCifar10: writes round(255 * x) per feature. Throws kData if
// the dataset is not 3072-dimensional with labels < 10.
void WriteCifar10(const Dataset& data, const std::filesystem::path& path);

struct PartitionSpec {
  std::size_t num_clients = 10;
  double tau = 0.3;  // in (0, 1]
  std::size_t train_per_client = 2500;
  std::size_t test_per_client = 1000;
  // Test shards follow the same non-IID(tau) mix as training when true,
  // otherwise they are class-balanced.
  bool test_matches_train = true;
  // Class-balanced training shards regardless of tau.
  bool iid = false;
};

// Share of a client's shard drawn from its dominant class.
double DominantFraction(double tau, int num_classes);

// Per-class sample counts for a shard of `total` samples dominated by
// `dominant` (largest-remainder rounding; ties go to classes following the
// dominant one cyclically).
std::vector<std::size_t> ClassCounts(std::size_t total, int dominant,
                                     double dominant_fraction,
                                     int num_classes);

// Client i is dominated by class i mod C. Samples are drawn without
// replacement from the pool; throws kData naming the deficit when a class
// runs out.
std::vector<Shard> PartitionNonIid(const Dataset& data,
                                   const PartitionSpec& spec,
                                   std::uint64_t seed);

struct AugmentSpec {
  double noise_std = 0.1;
  double mask_prob = 0.1;  // in [0, 1)
  std::size_t views = 2;

  void Validate() const;
};

// Two independent views: x + N(0, noise_std^2), then every coordinate zeroed
// independently with probability mask_prob.
std::pair<Tensor2, Tensor2> Augment(const AugmentSpec& spec,
                                    const Tensor2& batch, std::uint64_t seed);

// Self-describing dataset container (see README for the layout).
void SaveDataset(const Dataset& data, const std::filesystem::path& path,
                 const std::string& provenance_json);
struct LoadedDataset {
  Dataset data;
  std::string provenance_json;
};
LoadedDataset LoadDataset(const std::filesystem::path& path);

}  // namespace nmoe

#endif  // NMOE_DATASETS_H_
