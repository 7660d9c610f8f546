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

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"
#include "nmoe/error.h"
#include "nmoe/run_config.h"
#include "nmoe/runner.h"
#include "test_util.h"

namespace nmoe {
namespace {

using ::nmoe::testing::TempDir;

// A few seconds end to end.
constexpr const char* kSmallConfig = R"({
  "seed": 7,
  "data": {
    "synthetic": {"num_classes": 4, "dim": 6, "samples_per_class": 200},
    "partition": {"num_clients": 4, "tau": 0.3, "train_per_client": 80,
                  "test_per_client": 40}
  },
  "model": {"fe_hidden": [8], "latent_dim": 4, "expert_hidden": [8]},
  "stage1": {"rounds": 2, "local_epochs": 1},
  "stage2": {"epochs": 3},
  "stage3": {"fedgate": {"rounds": 2, "local_epochs": 1}},
  "baselines": {"epochs": 2}
})";

std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ErrorCode CodeOf(const std::string& json) {
  try {
    ParseRunConfig(json).Validate();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

std::string MessageOf(const std::string& json) {
  try {
    ParseRunConfig(json).Validate();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST(RunConfigTest, DefaultsMatchDocumentedValues) {
  const RunConfig c = ParseRunConfig("{}");
  EXPECT_EQ(c.data.partition.num_clients, 10u);
  EXPECT_EQ(c.k, 1u);
  EXPECT_EQ(c.stage1.schedule.rounds, 30u);
  EXPECT_EQ(c.stage1.schedule.local_epochs, 2u);
  EXPECT_EQ(c.stage1.schedule.sgd.lr, 0.05);
  EXPECT_EQ(c.stage1.fedsc.dp_noise_std, 0.05);
  EXPECT_EQ(c.stage2.options.epochs, 30u);
  EXPECT_EQ(c.stage3.fedgate.rounds, 20u);
  EXPECT_EQ(c.stage3.fedgate.lambda_load, 0.01);
  EXPECT_EQ(c.stage3.fedgate.client_fraction, 0.7);
  EXPECT_EQ(c.stage3.fedgate.sgd.max_grad_norm, 1.0);
  EXPECT_EQ(c.stage3.rollgate.p, 0.7);
  EXPECT_EQ(c.stage3.gate_noise_std, 0.01);
  EXPECT_EQ(c.stage3.fedgate.sgd.batch_size, 64u);
  c.Validate();
}

TEST(RunConfigTest, RoundTripsThroughJson) {
  const RunConfig c = ParseRunConfig(kSmallConfig);
  const RunConfig again = ParseRunConfig(RunConfigToJson(c));
  EXPECT_EQ(RunConfigToJson(c), RunConfigToJson(again));
  EXPECT_EQ(ConfigHash(c), ConfigHash(again));
  EXPECT_EQ(ConfigHash(c).size(), 16u);
  RunConfig other = c;
  other.seed = 8;
  EXPECT_NE(ConfigHash(c), ConfigHash(other));
}

TEST(RunConfigTest, RejectsUnknownKeysWrongTypesAndVersions) {
  EXPECT_EQ(CodeOf(R"({"stage1": {"roundz": 3}})"), ErrorCode::kConfig);
  EXPECT_NE(MessageOf(R"({"stage1": {"roundz": 3}})").find("stage1.roundz"),
            std::string::npos);
  EXPECT_EQ(CodeOf(R"({"k": "one"})"), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(R"({"version": 2})"), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(R"({"stage1": {"method": "fedxx"}})"), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf("not json"), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(R"({"data": {"partition": {"tau": 0}}})"),
            ErrorCode::kConfig);
  EXPECT_EQ(CodeOf(R"({"data": {"source": "container",
                               "container_path": "/no/such/file"}})"),
            ErrorCode::kConfig);
}

TEST(RunConfigTest, KLargerThanClientsIsRejected) {
  const std::string json =
      R"({"k": 5, "data": {"partition": {"num_clients": 4}}})";
  EXPECT_EQ(CodeOf(json), ErrorCode::kConfig);
  EXPECT_NE(MessageOf(json).find("k = 5"), std::string::npos)
      << MessageOf(json);
}

TEST(PipelineTest, SameConfigGivesByteIdenticalResults) {
  const RunConfig c = ParseRunConfig(kSmallConfig);
  const auto a = TempDir("det_a"), b = TempDir("det_b");
  RunPipeline(c, {.output_dir = a, .with_baselines = true});
  RunPipeline(c, {.output_dir = b, .with_baselines = true});
  const std::string ra = ReadFile(a / "results.jsonl");
  EXPECT_FALSE(ra.empty());
  EXPECT_EQ(ra, ReadFile(b / "results.jsonl"));
  EXPECT_EQ(ReadFile(a / "heatmap.csv"), ReadFile(b / "heatmap.csv"));
  EXPECT_EQ(ReadFile(a / "model.ckpt"), ReadFile(b / "model.ckpt"));
  EXPECT_FALSE(std::filesystem::exists(a / "FAILED"));
}

TEST(PipelineTest, ResultsCarryConfigHashAndAccounting) {
  const RunConfig c = ParseRunConfig(kSmallConfig);
  const auto dir = TempDir("records");
  const RunResult r = RunPipeline(c, {.output_dir = dir, .with_baselines = true});
  std::istringstream lines(ReadFile(dir / "results.jsonl"));
  std::uint64_t round_bytes = 0;
  bool saw_summary = false;
  int baselines = 0;
  for (std::string line; std::getline(lines, line);) {
    const auto j = nlohmann::json::parse(line);
    if (j["type"] == "round" &&
        j["stage"].get<std::string>().rfind("stage", 0) == 0) {
      round_bytes += j["bytes"].get<std::uint64_t>();
      EXPECT_FALSE(j.contains("wall_seconds"));
    }
    if (j.contains("config_hash")) EXPECT_EQ(j["config_hash"], r.config_hash);
    if (j["type"] == "summary") {
      saw_summary = true;
      EXPECT_EQ(j["training_bytes"].get<std::uint64_t>(), round_bytes);
      EXPECT_EQ(j["inference_bytes"].get<std::uint64_t>(),
                r.system.log.bytes_out + r.system.log.bytes_back);
    }
    if (j["type"] == "baseline") {
      ++baselines;
      if (j["system"] == "local_classifier") {
        EXPECT_EQ(j["training_bytes"], 0);
        EXPECT_EQ(j["routing"]["bytes_out"], 0);
        EXPECT_EQ(j["routing"]["local_ratio"], 1.0);
      }
    }
  }
  EXPECT_TRUE(saw_summary);
  EXPECT_EQ(baselines, 3);
  // Checkpoint carries the same hash.
  EXPECT_EQ(LoadCheckpoint(dir / "model.ckpt").config_hash, r.config_hash);
  // Wall clock lives in the log only.
  EXPECT_NE(ReadFile(dir / "log.jsonl").find("wall_seconds"), std::string::npos);
}

TEST(PipelineTest, EveryGateStrategyRuns) {
  for (const char* s : {"rangate", "rollgate", "fedgate"}) {
    RunConfig c = ParseRunConfig(kSmallConfig);
    c.stage3.strategy = ParseGateStrategy(s);
    c.stage1.method = Stage1Method::kFedCe;
    const RunResult r = RunPipeline(c);
    EXPECT_EQ(r.system.log.total(), 4 * 40) << s;
    EXPECT_GE(r.system.eval.pooled.accuracy, 0.0);
  }
}

TEST(PipelineTest, FailureLeavesMarker) {
  RunConfig c = ParseRunConfig(kSmallConfig);
  c.stage1.method = Stage1Method::kFedCe;
  c.stage1.schedule.sgd.lr = 1e8;
  c.stage1.schedule.sgd.max_grad_norm.reset();
  const auto dir = TempDir("failed");
  EXPECT_THROW(RunPipeline(c, {.output_dir = dir}), Error);
  const std::string marker = ReadFile(dir / "FAILED");
  EXPECT_NE(marker.find("training"), std::string::npos) << marker;
  EXPECT_NE(marker.find("round"), std::string::npos) << marker;
}

TEST(SweepTest, FailuresAreRecordedAndTheSweepContinues) {
  const RunConfig c = ParseRunConfig(kSmallConfig);
  const auto rows = RunAblation(c, SweepAxis::kK, {1, 9, 2});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].ok);
  EXPECT_FALSE(rows[1].ok);
  EXPECT_NE(rows[1].error.find("config"), std::string::npos);
  EXPECT_TRUE(rows[2].ok);
  const std::string csv = SweepCsv(SweepAxis::kK, rows);
  EXPECT_EQ(csv.rfind("k,status,accuracy", 0), 0u);
  EXPECT_NE(csv.find("\n9,failed,"), std::string::npos);
}

TEST(SweepTest, SinglePointEqualsPipeline) {
  const RunConfig c = ParseRunConfig(kSmallConfig);
  const auto rows = RunAblation(c, SweepAxis::kTau, {0.3});
  const RunResult r = RunPipeline(c);
  ASSERT_TRUE(rows[0].ok);
  EXPECT_EQ(rows[0].eval.pooled.accuracy, r.system.eval.pooled.accuracy);
  EXPECT_EQ(rows[0].local_ratio, r.system.local_ratio);
}

TEST(SweepTest, ClientSweepSplitsAStaticPool) {
  const RunConfig c = ParseRunConfig(kSmallConfig);
  const RunConfig two = SweepPoint(c, SweepAxis::kClients, 2);
  EXPECT_EQ(two.data.partition.num_clients, 2u);
  EXPECT_EQ(two.data.partition.train_per_client, 160u);
  EXPECT_EQ(two.data.partition.test_per_client, 80u);
  EXPECT_THROW(SweepPoint(c, SweepAxis::kK, 1.5), Error);
}

#ifdef NMOE_CLI_PATH
int RunCli(const std::string& args) {
  const int status = std::system((std::string(NMOE_CLI_PATH) + " " + args +
                                  " > /dev/null 2>&1")
                                     .c_str());
  return WEXITSTATUS(status);
}

TEST(CliTest, ExitCodesFollowErrorCategories) {
  const auto dir = TempDir("cli");
  {
    std::ofstream(dir / "bad.json") << R"({"k": 20})";
    std::ofstream(dir / "ok.json") << kSmallConfig;
  }
  EXPECT_EQ(RunCli("train -c " + (dir / "bad.json").string() + " -o " +
                   (dir / "out").string()),
            static_cast<int>(ErrorCode::kConfig));
  EXPECT_EQ(RunCli("no-such-command"), static_cast<int>(ErrorCode::kConfig));
  const std::string ok = (dir / "ok.json").string();
  ASSERT_EQ(RunCli("train -c " + ok + " -o " + (dir / "run").string()), 0);
  EXPECT_EQ(RunCli("evaluate -c " + ok + " --checkpoint " +
                   (dir / "run" / "model.ckpt").string() + " -o " +
                   (dir / "eval.jsonl").string()),
            0);
  EXPECT_EQ(RunCli("export-heatmap -c " + ok + " --checkpoint " +
                   (dir / "run" / "model.ckpt").string() + " -o " +
                   (dir / "heat.csv").string()),
            0);
  EXPECT_EQ(ReadFile(dir / "heat.csv"), ReadFile(dir / "run" / "heatmap.csv"));
  // A checkpoint from a different config is refused.
  EXPECT_EQ(RunCli("evaluate -c " + ok + " --seed 99 --checkpoint " +
                   (dir / "run" / "model.ckpt").string()),
            static_cast<int>(ErrorCode::kConfig));
  EXPECT_EQ(RunCli("generate-data -c " + ok + " -o " +
                   (dir / "pool.nmds").string()),
            0);
  EXPECT_EQ(LoadDataset(dir / "pool.nmds").data.size(), 800u);
  EXPECT_EQ(RunCli("partition -c " + ok + " -o " + (dir / "shards").string()),
            0);
  EXPECT_EQ(LoadDataset(dir / "shards" / "client_3_test.nmds").data.size(),
            40u);
  EXPECT_EQ(RunCli("evaluate -c " + ok + " --checkpoint " +
                   (dir / "missing.ckpt").string()),
            static_cast<int>(ErrorCode::kConfig));
}
#endif

}  // namespace
}  // namespace nmoe
