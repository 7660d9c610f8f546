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

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmoe/error.h"
#include "nmoe/ops.h"
#include "nmoe/rng.h"
#include "nmoe/runner.h"
#include "runner_json.h"

namespace nmoe {

Dataset LoadPool(const RunConfig& config) {
  switch (config.data.source) {
    case DataSource::kSynthetic:
      return GenSynthetic(config.data.synthetic, config.seed);
    case DataSource::kCifar10:
      return LoadCifar10(config.data.cifar10_paths);
    case DataSource::kContainer:
      return LoadDataset(config.data.container_path).data;
  }
  Fail(ErrorCode::kInternal, "unknown data source");
}

PreparedData PrepareData(const RunConfig& config) {
  config.Validate();
  const Dataset pool = LoadPool(config);
  PreparedData out;
  out.shards = PartitionNonIid(pool, config.data.partition, config.seed);
  for (const auto& s : out.shards) {
    out.train.push_back(s.train);
    out.test.push_back(s.test);
  }
  out.input_dim = pool.dim();
  out.num_classes = pool.num_classes;
  return out;
}

Backbone TrainBackbone(const RunConfig& config, const PreparedData& data) {
  Backbone b;
  b.fe_spec = config.model.FeSpec(data.input_dim);
  b.expert_spec =
      config.model.ExpertSpec(static_cast<std::size_t>(data.num_classes));
  FedSchedule schedule = config.stage1.schedule;
  schedule.bytes_per_scalar = config.bytes_per_scalar;
  if (config.stage1.method == Stage1Method::kFedCe) {
    b.stage1 = Stage1FedCe(data.train, b.fe_spec, b.expert_spec, schedule,
                           config.seed);
  } else {
    b.stage1 = Stage1FedSc(data.train, b.fe_spec, schedule, config.stage1.fedsc,
                           config.seed);
  }
  std::span<const ParamSet> init;
  if (config.stage2.warm_start_from_fedce && !b.stage1.heads.empty()) {
    init = b.stage1.heads;
  }
  b.stage2 = Stage2Experts(data.train, b.fe_spec, b.stage1.fe, b.expert_spec,
                           config.stage2.options, config.seed, init);
  return b;
}

NmoeModel AssembleModel(const Backbone& backbone, GateModel gate) {
  NmoeModel model;
  model.fe_spec = backbone.fe_spec;
  model.fe = backbone.stage1.fe;
  model.gate = std::move(gate);
  model.expert_spec = backbone.expert_spec;
  model.experts = backbone.stage2.experts;
  model.Validate();
  return model;
}

GateTraining TrainGate(const RunConfig& config, const PreparedData& data,
                       const Backbone& backbone) {
  const std::size_t m = data.train.size();
  GateTraining out;
  const LinearGate init = LinearGate::Init(
      backbone.fe_spec.output_width(), m,
      DeriveSeed(config.seed, Stream::kGateInit), config.stage3.gate_noise_std);
  switch (config.stage3.strategy) {
    case GateStrategy::kRanGate: {
      RandomGate gate = config.stage3.rangate_distribution.empty()
                            ? Stage3RanGate(m)
                            : RandomGate{config.stage3.rangate_distribution};
      gate.Validate(config.k);
      out.gate = std::move(gate);
      break;
    }
    case GateStrategy::kRollGate: {
      RollGateOptions options = config.stage3.rollgate;
      options.bytes_per_scalar = config.bytes_per_scalar;
      auto r = Stage3RollGate(data.train, backbone.fe_spec, backbone.stage1.fe,
                              init, options, config.seed);
      out.gate = std::move(r.gate);
      out.reports = std::move(r.reports);
      break;
    }
    case GateStrategy::kFedGate: {
      FedGateOptions options = config.stage3.fedgate;
      options.k = config.k;
      options.bytes_per_scalar = config.bytes_per_scalar;
      auto r = Stage3FedGate(data.train, AssembleModel(backbone, init), options,
                             config.seed);
      out.gate = std::move(r.gate);
      out.reports = std::move(r.reports);
      break;
    }
  }
  return out;
}

SystemEval EvaluateSystem(const NmoeModel& model, const PreparedData& data,
                          std::size_t k, std::size_t bytes_per_scalar,
                          std::uint64_t seed) {
  const CostModel cost{.bytes_per_scalar = bytes_per_scalar,
                       .latent_dim = model.latent_dim(),
                       .num_classes = model.num_classes()};
  InferenceResult inf = SimulateInference(model, data.test, k, cost, seed);
  std::vector<ClientScores> scores;
  for (std::size_t c = 0; c < data.test.size(); ++c) {
    scores.push_back({Softmax(inf.logits[c]), data.test[c].labels});
  }
  SystemEval out;
  out.eval = EvaluateClients(scores);
  out.local_ratio = LocalRatio(inf.log);
  out.diagonal_dominant = DiagonalDominant(inf.log);
  out.log = std::move(inf.log);
  return out;
}

namespace {

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.is_open(), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  out.flush();
  Require(out.good(), ErrorCode::kIo, "write failed for " + path.string());
}

std::string LogJsonl(const RunResult& r) {
  std::string out;
  auto emit = [&](const std::vector<FedRoundReport>& reports) {
    for (const auto& rep : reports) {
      for (std::size_t i = 0; i < rep.participants.size(); ++i) {
        nlohmann::json j = {{"stage", rep.stage},
                            {"round", rep.round},
                            {"client", rep.participants[i]},
                            {"loss", rep.client_losses[i]},
                            {"bytes", rep.bytes},
                            {"wall_seconds", rep.wall_seconds}};
        out += j.dump() + "\n";
      }
    }
  };
  emit(r.reports);
  if (r.baselines) {
    emit(r.baselines->local_classifier.reports);
    emit(r.baselines->fedavg_classifier.reports);
    emit(r.baselines->centralized_moe.reports);
  }
  return out;
}

}  // namespace

RunResult RunPipeline(const RunConfig& config, const RunOptions& options) {
  const auto& dir = options.output_dir;
  if (dir) {
    std::error_code ec;
    std::filesystem::create_directories(*dir, ec);
    Require(!ec, ErrorCode::kIo, "cannot create " + dir->string());
    std::filesystem::remove(*dir / "FAILED", ec);
  }
  RunResult result;
  try {
    config.Validate();
    result.config = config;
    result.config_hash = ConfigHash(config);
    const PreparedData data = PrepareData(config);
    const Backbone backbone = TrainBackbone(config, data);
    result.reports = backbone.stage1.reports;
    FedRoundReport s2;
    s2.stage = "stage2";
    for (std::size_t i = 0; i < backbone.stage2.experts.size(); ++i) {
      s2.participants.push_back(i);
      s2.client_losses.push_back(backbone.stage2.final_losses[i]);
    }
    std::uint64_t h = 0;
    for (const auto& e : backbone.stage2.experts) {
      h = h * 1099511628211ULL ^ e.Hash();
    }
    s2.params_hash = HashHex(h);
    s2.bytes = backbone.stage2.bytes;
    result.stage2_bytes = backbone.stage2.bytes;
    result.reports.push_back(s2);
    GateTraining gate = TrainGate(config, data, backbone);
    result.reports.insert(result.reports.end(), gate.reports.begin(),
                          gate.reports.end());
    result.model = AssembleModel(backbone, std::move(gate.gate));
    result.system = EvaluateSystem(result.model, data, config.k,
                                   config.bytes_per_scalar, config.seed);
    if (options.with_baselines) result.baselines = RunBaselines(config, data);

    if (dir) {
      std::string results = ResultsJsonl(result);
      if (result.baselines) results += BaselineJsonl(*result.baselines);
      WriteText(*dir / "results.jsonl", results);
      WriteText(*dir / "log.jsonl", LogJsonl(result));
      SaveCheckpoint(result.model, result.config_hash, *dir / "model.ckpt");
      ExportHeatmap(result.system.log, *dir / "heatmap.csv",
                    {.k = config.k,
                     .seed = config.seed,
                     .config_hash = result.config_hash});
    }
  } catch (const Error& e) {
    if (dir) {
      std::ofstream failed(*dir / "FAILED");
      failed << ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    }
    throw;
  }
  return result;
}

std::string ResultsJsonl(const RunResult& r) {
  using nlohmann::json;
  std::string out;
  json header = {{"type", "config"},
                 {"config_hash", r.config_hash},
                 {"config", json::parse(RunConfigToJson(r.config))}};
  out += header.dump() + "\n";
  std::uint64_t training = 0;
  for (const auto& rep : r.reports) {
    out += internal::RoundJson(rep).dump() + "\n";
    training += rep.bytes;
  }
  json eval = {{"type", "eval"},
               {"config_hash", r.config_hash},
               {"system", "nmoe"},
               {"metrics", internal::EvalJson(r.system.eval)}};
  out += eval.dump() + "\n";
  json routing = internal::RoutingJson(r.system);
  routing["type"] = "routing";
  routing["config_hash"] = r.config_hash;
  routing["system"] = "nmoe";
  out += routing.dump() + "\n";
  json summary = {{"type", "summary"},
                  {"config_hash", r.config_hash},
                  {"training_bytes", training},
                  {"stage2_bytes", r.stage2_bytes},
                  {"inference_bytes",
                   r.system.log.bytes_out + r.system.log.bytes_back},
                  {"pooled_accuracy", r.system.eval.pooled.accuracy},
                  {"pooled_macro_f1", r.system.eval.pooled.macro_f1},
                  {"pooled_macro_auc", r.system.eval.pooled.macro_auc},
                  {"local_ratio", r.system.local_ratio}};
  out += summary.dump() + "\n";
  return out;
}

}  // namespace nmoe
