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

#ifndef NMOE_RUNNER_H_
#define NMOE_RUNNER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nmoe/datasets.h"
#include "nmoe/fed_train.h"
#include "nmoe/metrics.h"
#include "nmoe/moe.h"
#include "nmoe/netsim.h"
#include "nmoe/run_config.h"

namespace nmoe {

struct PreparedData {
  std::vector<Shard> shards;
  std::vector<Dataset> train;  // shards[i].train
  std::vector<Dataset> test;   // shards[i].test
  std::size_t input_dim = 0;
  int num_classes = 0;
};

// Loads or generates the pool named by the config and partitions it.
Dataset LoadPool(const RunConfig& config);
PreparedData PrepareData(const RunConfig& config);

// Stage 1 and stage 2.
struct Backbone {
  MlpSpec fe_spec;
  MlpSpec expert_spec;
  Stage1Result stage1;
  Stage2Result stage2;
};
Backbone TrainBackbone(const RunConfig& config, const PreparedData& data);

struct GateTraining {
  GateModel gate;
  std::vector<FedRoundReport> reports;
};
// Stage 3 with config.stage3.strategy.
GateTraining TrainGate(const RunConfig& config, const PreparedData& data,
                       const Backbone& backbone);

NmoeModel AssembleModel(const Backbone& backbone, GateModel gate);

struct SystemEval {
  EvalReport eval;
  RoutingLog log;
  double local_ratio = 0.0;
  bool diagonal_dominant = false;
};

// Serverless inference over every client's test shard, then metrics on the
// softmax scores.
SystemEval EvaluateSystem(const NmoeModel& model, const PreparedData& data,
                          std::size_t k, std::size_t bytes_per_scalar,
                          std::uint64_t seed);

struct BaselineResult {
  std::string name;
  SystemEval system;
  std::vector<FedRoundReport> reports;
};

struct BaselineOutputs {
  BaselineResult local_classifier;
  BaselineResult fedavg_classifier;
  BaselineResult centralized_moe;
};

BaselineResult LocalClassifierBaseline(const RunConfig& config,
                                       const PreparedData& data);
BaselineResult FedAvgClassifierBaseline(const RunConfig& config,
                                        const PreparedData& data);
// Also returns the trained model through `model` when non-null.
BaselineResult CentralizedMoeBaseline(const RunConfig& config,
                                      const PreparedData& data,
                                      NmoeModel* model = nullptr);
BaselineOutputs RunBaselines(const RunConfig& config, const PreparedData& data);

struct RunResult {
  RunConfig config;
  std::string config_hash;
  std::vector<FedRoundReport> reports;  // stage 1, stage 2 summary, stage 3
  std::uint64_t stage2_bytes = 0;
  SystemEval system;
  NmoeModel model;
  std::optional<BaselineOutputs> baselines;
};

struct RunOptions {
  // Artifacts go here when set: results.jsonl, log.jsonl, model.ckpt,
  // heatmap.csv (+ manifest). A FAILED file marks an aborted run.
  std::optional<std::filesystem::path> output_dir;
  bool with_baselines = false;
};

RunResult RunPipeline(const RunConfig& config, const RunOptions& options = {});

// Line-delimited results record. A pure function of the config: no wall
// clock, no paths.
std::string ResultsJsonl(const RunResult& result);
std::string BaselineJsonl(const BaselineOutputs& baselines);

enum class SweepAxis { kClients, kK, kTau };
SweepAxis ParseSweepAxis(std::string_view name);
std::string_view SweepAxisName(SweepAxis axis);

struct SweepRow {
  double value = 0.0;
  bool ok = false;
  std::string error;
  EvalReport eval;
  double local_ratio = 0.0;
  std::uint64_t training_bytes = 0;
  std::uint64_t inference_bytes = 0;
};

// The config for one grid point. Client sweeps keep the total pool size
// fixed and split it into `value` shards.
RunConfig SweepPoint(const RunConfig& base, SweepAxis axis, double value);

// One pipeline per value; failures are recorded and the sweep moves on.
std::vector<SweepRow> RunAblation(const RunConfig& base, SweepAxis axis,
                                  const std::vector<double>& values);
std::string SweepCsv(SweepAxis axis, const std::vector<SweepRow>& rows);

}  // namespace nmoe

#endif  // NMOE_RUNNER_H_
