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

// nmoe: command-line front end. Every subcommand takes a config file; see
// README for the schema.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nmoe/error.h"
#include "nmoe/runner.h"

namespace {

using namespace nmoe;

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.is_open(), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  Require(out.good(), ErrorCode::kIo, "write failed for " + path.string());
}

RunConfig Load(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig c = LoadRunConfig(path);
  if (seed) c.seed = *seed;
  c.Validate();
  return c;
}

// Loads a checkpoint and refuses one written under a different config.
NmoeModel LoadMatching(const std::filesystem::path& path,
                       const RunConfig& config) {
  LoadedCheckpoint ckpt = LoadCheckpoint(path);
  const std::string want = ConfigHash(config);
  Require(ckpt.config_hash == want, ErrorCode::kConfig,
          "checkpoint " + path.string() + " was written under config " +
              ckpt.config_hash + ", not " + want);
  return std::move(ckpt.model);
}

std::string ProvenanceJson(const RunConfig& c) {
  nlohmann::json cfg = nlohmann::json::parse(RunConfigToJson(c));
  return nlohmann::json{{"seed", c.seed},
                        {"config_hash", ConfigHash(c)},
                        {"data", cfg["data"]}}
      .dump();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Networked mixture-of-experts simulator"};
  app.require_subcommand(1);

  std::string config_path, out, checkpoint, axis, values;
  std::optional<std::uint64_t> seed;
  bool with_baselines = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
  };

  auto* gen = app.add_subcommand("generate-data",
                                 "write the configured data pool to a file");
  add_common(gen);
  gen->add_option("-o,--out", out, "dataset container path")->required();

  auto* part = app.add_subcommand("partition",
                                  "write per-client train/test shards");
  add_common(part);
  part->add_option("-o,--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "run stages 1-3 and evaluate");
  add_common(train);
  train->add_option("-o,--out", out, "output directory")->required();
  train->add_flag("--baselines", with_baselines, "also run the baselines");

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint)->required()->check(
      CLI::ExistingFile);
  eval->add_option("-o,--out", out, "write the eval record here");

  auto* base = app.add_subcommand("baselines",
                                  "local, FedAvg and centralized baselines");
  add_common(base);
  base->add_option("-o,--out", out, "output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "ablation over one axis");
  add_common(sweep);
  sweep->add_option("--axis", axis, "clients, k or tau")->required();
  sweep->add_option("--values", values, "comma-separated grid")->required();
  sweep->add_option("-o,--out", out, "CSV path")->required();

  auto* heat = app.add_subcommand("export-heatmap",
                                  "routing heatmap of a checkpoint");
  add_common(heat);
  heat->add_option("--checkpoint", checkpoint)->required()->check(
      CLI::ExistingFile);
  heat->add_option("-o,--out", out, "CSV path")->required();

  auto* show = app.add_subcommand("show-config",
                                  "print the fully resolved config");
  show->add_option("-c,--config", config_path, "config (defaults if absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorCode::kConfig);
  }

  try {
    if (*show) {
      const RunConfig c =
          config_path.empty() ? RunConfig{} : LoadRunConfig(config_path);
      std::cout << RunConfigToJson(c, 2) << "\n";
      return 0;
    }
    const RunConfig config = Load(config_path, seed);
    if (*gen) {
      SaveDataset(LoadPool(config), out, ProvenanceJson(config));
    } else if (*part) {
      const PreparedData data = PrepareData(config);
      const std::filesystem::path dir = out;
      std::filesystem::create_directories(dir);
      for (const auto& s : data.shards) {
        const std::string id = std::to_string(s.client_id);
        SaveDataset(s.train, dir / ("client_" + id + "_train.nmds"),
                    ProvenanceJson(config));
        SaveDataset(s.test, dir / ("client_" + id + "_test.nmds"),
                    ProvenanceJson(config));
      }
    } else if (*train) {
      const RunResult r = RunPipeline(
          config, {.output_dir = out, .with_baselines = with_baselines});
      std::cout << "pooled accuracy " << r.system.eval.pooled.accuracy
                << ", macro F1 " << r.system.eval.pooled.macro_f1
                << ", macro AUC " << r.system.eval.pooled.macro_auc
                << ", LR " << r.system.local_ratio << "\n";
    } else if (*eval) {
      const NmoeModel model = LoadMatching(checkpoint, config);
      const PreparedData data = PrepareData(config);
      const SystemEval s = EvaluateSystem(model, data, config.k,
                                          config.bytes_per_scalar, config.seed);
      RunResult r;
      r.config = config;
      r.config_hash = ConfigHash(config);
      r.system = s;
      const std::string text = ResultsJsonl(r);
      if (out.empty()) {
        std::cout << text;
      } else {
        WriteFile(out, text);
      }
    } else if (*base) {
      const PreparedData data = PrepareData(config);
      WriteFile(std::filesystem::path(out) / "baselines.jsonl",
                BaselineJsonl(RunBaselines(config, data)));
    } else if (*sweep) {
      const SweepAxis a = ParseSweepAxis(axis);
      std::vector<double> grid;
      std::stringstream ss(values);
      for (std::string item; std::getline(ss, item, ',');) {
        try {
          grid.push_back(std::stod(item));
        } catch (const std::exception&) {
          Fail(ErrorCode::kConfig, "bad sweep value '" + item + "'");
        }
      }
      const auto rows = RunAblation(config, a, grid);
      WriteFile(out, SweepCsv(a, rows));
      for (const auto& row : rows) {
        if (!row.ok) std::cerr << "point " << row.value << ": " << row.error
                               << "\n";
      }
    } else if (*heat) {
      const NmoeModel model = LoadMatching(checkpoint, config);
      const PreparedData data = PrepareData(config);
      const SystemEval s = EvaluateSystem(model, data, config.k,
                                          config.bytes_per_scalar, config.seed);
      ExportHeatmap(s.log, out,
                    {.k = config.k,
                     .seed = config.seed,
                     .config_hash = ConfigHash(config)});
    }
  } catch (const Error& e) {
    std::cerr << "error (" << ErrorCodeName(e.code()) << "): " << e.what()
              << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error (internal): " << e.what() << "\n";
    return static_cast<int>(ErrorCode::kInternal);
  }
  return 0;
}
