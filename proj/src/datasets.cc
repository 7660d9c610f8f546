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

#include "nmoe/datasets.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "nmoe/error.h"
#include "nmoe/rng.h"

namespace nmoe {

void Dataset::Validate() const {
  Require(!labels.empty(), ErrorCode::kData, "dataset is empty");
  Require(features.rows() == labels.size(), ErrorCode::kData,
          "feature rows do not match label count");
  Require(num_classes > 0, ErrorCode::kData, "dataset has no classes");
  for (int y : labels) {
    Require(y >= 0 && y < num_classes, ErrorCode::kData,
            "label " + std::to_string(y) + " out of range");
  }
}

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = SelectRows(features, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  out.num_classes = num_classes;
  return out;
}

Dataset Concat(std::span<const Dataset> parts) {
  Require(!parts.empty(), ErrorCode::kData, "nothing to concatenate");
  Dataset out;
  out.num_classes = parts.front().num_classes;
  std::vector<Tensor2> features;
  for (const auto& p : parts) {
    Require(p.num_classes == out.num_classes, ErrorCode::kData,
            "class count mismatch while pooling datasets");
    features.push_back(p.features);
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  out.features = ConcatRows(features);
  return out;
}

Tensor2 SyntheticMeans(const SyntheticSpec& spec, std::uint64_t seed) {
  Require(spec.num_classes > 0 && spec.dim > 0, ErrorCode::kConfig,
          "synthetic dataset needs positive class count and dimension");
  Engine engine = MakeEngine(seed, Stream::kData, {0});
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor2 means(static_cast<std::size_t>(spec.num_classes), spec.dim);
  for (std::size_t c = 0; c < means.rows(); ++c) {
    auto row = means.row(c);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : row) {
        v = normal(engine);
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (double& v : row) v *= spec.radius / norm;
  }
  return means;
}

Dataset GenSynthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  Require(spec.samples_per_class > 0, ErrorCode::kConfig,
          "samples per class must be positive");
  Require(spec.spread >= 0.0, ErrorCode::kConfig, "spread must be >= 0");
  const Tensor2 means = SyntheticMeans(spec, seed);
  const std::size_t classes = static_cast<std::size_t>(spec.num_classes);
  Dataset data;
  data.num_classes = spec.num_classes;
  data.features = Tensor2(classes * spec.samples_per_class, spec.dim);
  data.labels.resize(data.features.rows());
  Engine engine = MakeEngine(seed, Stream::kData, {1});
  std::normal_distribution<double> normal(0.0, 1.0);
  // Classes interleaved so any prefix of the pool is roughly balanced.
  for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t i = s * classes + c;
      data.labels[i] = static_cast<int>(c);
      auto row = data.features.row(i);
      const auto mean = means.row(c);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        row[j] = mean[j] + spec.spread * normal(engine);
      }
    }
  }
  return data;
}

double DominantFraction(double tau, int num_classes) {
  return std::max(1.0 - tau, 1.0 / static_cast<double>(num_classes));
}

std::vector<std::size_t> ClassCounts(std::size_t total, int dominant,
                                     double dominant_fraction,
                                     int num_classes) {
  const std::size_t c = static_cast<std::size_t>(num_classes);
  std::vector<double> quota(c);
  for (std::size_t k = 0; k < c; ++k) {
    quota[k] = static_cast<int>(k) == dominant
                   ? static_cast<double>(total) * dominant_fraction
                   : c == 1 ? 0.0
                            : static_cast<double>(total) *
                                  (1.0 - dominant_fraction) /
                                  static_cast<double>(c - 1);
  }
  std::vector<std::size_t> counts(c);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < c; ++k) {
    // Absorb representation error such as 0.8 * 1000 = 800.0000000000001.
    counts[k] = static_cast<std::size_t>(std::floor(quota[k] + 1e-9));
    assigned += counts[k];
  }
  // Cyclic order after the dominant class breaks remainder ties so leftover
  // samples are spread evenly across clients.
  std::vector<std::size_t> order(c);
  for (std::size_t k = 0; k < c; ++k) {
    order[k] = (static_cast<std::size_t>(dominant) + 1 + k) % c;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = quota[a] - static_cast<double>(counts[a]);
    const double rb = quota[b] - static_cast<double>(counts[b]);
    return ra > rb + 1e-9;
  });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % c) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

std::vector<Shard> PartitionNonIid(const Dataset& data,
                                   const PartitionSpec& spec,
                                   std::uint64_t seed) {
  data.Validate();
  const int classes = data.num_classes;
  Require(spec.num_clients >= 1, ErrorCode::kConfig, "need at least 1 client");
  Require(spec.num_clients <= static_cast<std::size_t>(classes),
          ErrorCode::kConfig,
          "client count " + std::to_string(spec.num_clients) +
              " exceeds class count " + std::to_string(classes));
  Require(spec.tau > 0.0 && spec.tau <= 1.0, ErrorCode::kConfig,
          "tau must lie in (0, 1]; single-class shards are not supported");
  Require(spec.train_per_client > 0, ErrorCode::kConfig,
          "train_per_client must be positive");

  const double train_frac =
      spec.iid ? 1.0 / classes : DominantFraction(spec.tau, classes);
  const double test_frac =
      spec.test_matches_train ? train_frac : 1.0 / classes;

  std::vector<std::vector<std::size_t>> train_counts, test_counts;
  std::vector<std::size_t> demand(classes, 0);
  for (std::size_t i = 0; i < spec.num_clients; ++i) {
    const int dominant = static_cast<int>(i % classes);
    train_counts.push_back(
        ClassCounts(spec.train_per_client, dominant, train_frac, classes));
    test_counts.push_back(
        ClassCounts(spec.test_per_client, dominant, test_frac, classes));
    for (int c = 0; c < classes; ++c) {
      demand[c] += train_counts.back()[c] + test_counts.back()[c];
    }
  }

  std::vector<std::vector<std::size_t>> pool(classes);
  for (std::size_t i = 0; i < data.size(); ++i) pool[data.labels[i]].push_back(i);
  std::string deficit;
  for (int c = 0; c < classes; ++c) {
    if (demand[c] > pool[c].size()) {
      deficit += " class " + std::to_string(c) + " needs " +
                 std::to_string(demand[c]) + " has " +
                 std::to_string(pool[c].size()) + " (short " +
                 std::to_string(demand[c] - pool[c].size()) + ");";
    }
  }
  Require(deficit.empty(), ErrorCode::kData,
          "insufficient samples for partition:" + deficit);

  for (int c = 0; c < classes; ++c) {
    Engine engine = MakeEngine(seed, Stream::kPartition,
                               {static_cast<std::uint64_t>(c)});
    const auto perm = Permutation(pool[c].size(), engine);
    std::vector<std::size_t> shuffled(pool[c].size());
    for (std::size_t k = 0; k < perm.size(); ++k) shuffled[k] = pool[c][perm[k]];
    pool[c] = std::move(shuffled);
  }
  std::vector<std::size_t> cursor(classes, 0);
  auto draw = [&](const std::vector<std::size_t>& counts, std::uint64_t tag) {
    std::vector<std::size_t> picked;
    for (int c = 0; c < classes; ++c) {
      for (std::size_t k = 0; k < counts[c]; ++k) {
        picked.push_back(pool[c][cursor[c]++]);
      }
    }
    Engine engine = MakeEngine(seed, Stream::kPartition, {1000 + tag});
    const auto perm = Permutation(picked.size(), engine);
    std::vector<std::size_t> out(picked.size());
    for (std::size_t k = 0; k < perm.size(); ++k) out[k] = picked[perm[k]];
    return out;
  };

  std::vector<Shard> shards(spec.num_clients);
  for (std::size_t i = 0; i < spec.num_clients; ++i) {
    shards[i].client_id = i;
    shards[i].dominant_class = static_cast<int>(i % classes);
    shards[i].train_indices = draw(train_counts[i], 2 * i);
  }
  for (std::size_t i = 0; i < spec.num_clients; ++i) {
    shards[i].test_indices = draw(test_counts[i], 2 * i + 1);
  }
  for (auto& s : shards) {
    s.train = data.Subset(s.train_indices);
    s.test = data.Subset(s.test_indices);
  }
  return shards;
}

void AugmentSpec::Validate() const {
  Require(noise_std >= 0.0, ErrorCode::kConfig, "noise std must be >= 0");
  Require(mask_prob >= 0.0 && mask_prob < 1.0, ErrorCode::kConfig,
          "mask prob must lie in [0, 1)");
  Require(views == 2, ErrorCode::kConfig, "augmentation produces two views");
}

std::pair<Tensor2, Tensor2> Augment(const AugmentSpec& spec,
                                    const Tensor2& batch, std::uint64_t seed) {
  spec.Validate();
  Engine engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto view = [&] {
    Tensor2 v = batch;
    for (double& x : v.data()) {
      if (spec.noise_std > 0.0) x += spec.noise_std * normal(engine);
      if (spec.mask_prob > 0.0 && unit(engine) < spec.mask_prob) x = 0.0;
    }
    return v;
  };
  Tensor2 first = view();
  Tensor2 second = view();
  return {std::move(first), std::move(second)};
}

}  // namespace nmoe
