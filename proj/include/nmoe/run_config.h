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

#ifndef NMOE_RUN_CONFIG_H_
#define NMOE_RUN_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nmoe/datasets.h"
#include "nmoe/fed_train.h"
#include "nmoe/mlp.h"

namespace nmoe {

inline constexpr int kConfigVersion = 1;

enum class DataSource { kSynthetic, kCifar10, kContainer };
enum class Stage1Method { kFedCe, kFedSc };
enum class GateStrategy { kRanGate, kRollGate, kFedGate };

std::string_view Stage1MethodName(Stage1Method m);
std::string_view GateStrategyName(GateStrategy g);
GateStrategy ParseGateStrategy(std::string_view name);
Stage1Method ParseStage1Method(std::string_view name);

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  SyntheticSpec synthetic;
  std::vector<std::filesystem::path> cifar10_paths;
  std::filesystem::path container_path;
  PartitionSpec partition;
};

struct ModelConfig {
  std::vector<std::size_t> fe_hidden = {64};
  std::size_t latent_dim = 16;
  std::vector<std::size_t> expert_hidden = {64, 32};
  Activation activation = Activation::kRelu;

  MlpSpec FeSpec(std::size_t input_dim) const;
  MlpSpec ExpertSpec(std::size_t num_classes) const;
};

struct Stage1Config {
  Stage1Method method = Stage1Method::kFedSc;
  // rounds 30, local epochs 2, lr 0.05, batch 64. The spectral objective
  // diverges on the first round without clipping.
  FedSchedule schedule{.sgd = {.max_grad_norm = 1.0}};
  FedScOptions fedsc;    // augment + DP noise 0.05
};

struct Stage2Config {
  Stage2Options options;  // 30 epochs, lr 0.05, batch 64
  bool warm_start_from_fedce = true;
};

struct Stage3Config {
  GateStrategy strategy = GateStrategy::kFedGate;
  FedGateOptions fedgate;
  RollGateOptions rollgate;
  std::vector<double> rangate_distribution;  // empty = uniform
  double gate_noise_std = 0.01;
};

struct BaselineConfig {
  // Epochs of end-to-end training for the local and centralized baselines;
  // FedAvg uses the stage-1 schedule.
  std::size_t epochs = 60;
  SgdOptions sgd;
  double lambda_load = 0.01;
};

struct RunConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 1;
  DataConfig data;
  ModelConfig model;
  Stage1Config stage1;
  Stage2Config stage2;
  Stage3Config stage3;
  BaselineConfig baselines;
  std::size_t k = 1;
  std::size_t bytes_per_scalar = 4;

  // Throws kConfig naming the offending key; checks k <= m, ranges and that
  // referenced files exist.
  void Validate() const;
};

// Parses the JSON text. Missing keys take defaults; unknown keys, wrong
// types and a version mismatch are kConfig errors.
RunConfig ParseRunConfig(const std::string& json_text);
RunConfig LoadRunConfig(const std::filesystem::path& path);

// Canonical JSON of the fully resolved config (every key present).
std::string RunConfigToJson(const RunConfig& config, int indent = -1);

// FNV-1a of the canonical JSON, as 16 hex digits.
std::string ConfigHash(const RunConfig& config);

}  // namespace nmoe

#endif  // NMOE_RUN_CONFIG_H_
