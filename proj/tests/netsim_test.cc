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
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"
#include "nmoe/error.h"
#include "nmoe/metrics.h"
#include "nmoe/netsim.h"
#include "test_util.h"

namespace nmoe {
namespace {

using ::nmoe::testing::RandomTensor;
using ::nmoe::testing::TempDir;

NmoeModel RandomModel(std::size_t m, std::size_t dim, std::size_t latent,
                      std::size_t classes, std::uint64_t seed) {
  NmoeModel model;
  model.fe_spec = MlpSpec::Make({dim, 8, latent});
  model.fe = InitMlp(model.fe_spec, seed);
  model.expert_spec = MlpSpec::Make({latent, classes});
  for (std::size_t i = 0; i < m; ++i) {
    model.experts.push_back(InitMlp(model.expert_spec, seed + 1 + i));
  }
  model.gate = LinearGate::Init(latent, m, seed + 100);
  return model;
}

std::vector<Dataset> RandomTests(std::size_t m, std::size_t dim,
                                 std::vector<std::size_t> sizes,
                                 std::mt19937_64& engine) {
  std::vector<Dataset> out;
  for (std::size_t c = 0; c < m; ++c) {
    Dataset d;
    d.num_classes = 3;
    d.features = RandomTensor(sizes[c], dim, engine);
    for (std::size_t r = 0; r < sizes[c]; ++r) {
      d.labels.push_back(static_cast<int>(engine() % 3));
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(AccountingTest, RemoteSelectionFixture) {
  const CostModel cost{.bytes_per_scalar = 4, .latent_dim = 64,
                       .num_classes = 10};
  RoutingLog log(2);
  for (int i = 0; i < 100; ++i) RecordSelection(log, 0, 1, cost);
  EXPECT_EQ(log.bytes_out, 25600u);
  EXPECT_EQ(log.bytes_back, 4000u);
  for (int i = 0; i < 50; ++i) RecordSelection(log, 1, 1, cost);
  EXPECT_EQ(log.bytes_out, 25600u);
  EXPECT_EQ(log.counts[0][1], 100);
  EXPECT_EQ(log.counts[1][1], 50);
  EXPECT_THROW(RecordSelection(log, 2, 0, cost), Error);
}

TEST(AccountingTest, LocalOnlyLogCostsNothing) {
  const std::vector<std::size_t> sizes = {5, 7, 9};
  const RoutingLog log = LocalOnlyLog(sizes);
  EXPECT_EQ(log.bytes_out + log.bytes_back, 0u);
  EXPECT_EQ(LocalRatio(log), 1.0);
  EXPECT_EQ(log.total(), 21);
  EXPECT_TRUE(DiagonalDominant(log));
}

TEST(AccountingTest, RandomizedLogsMatchClosedForm) {
  std::mt19937_64 engine(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + engine() % 8;
    const CostModel cost{.bytes_per_scalar = 1 + engine() % 8,
                         .latent_dim = 1 + engine() % 64,
                         .num_classes = 2 + engine() % 20};
    RoutingLog log(m);
    const std::size_t draws = engine() % 500;
    for (std::size_t i = 0; i < draws; ++i) {
      RecordSelection(log, engine() % m, engine() % m, cost);
    }
    std::uint64_t remote = 0;
    for (std::size_t c = 0; c < m; ++c) {
      for (std::size_t e = 0; e < m; ++e) {
        if (c != e) remote += static_cast<std::uint64_t>(log.counts[c][e]);
      }
    }
    EXPECT_EQ(log.total(), static_cast<std::int64_t>(draws));
    EXPECT_EQ(log.bytes_out, remote * cost.latent_dim * cost.bytes_per_scalar);
    EXPECT_EQ(log.bytes_back,
              remote * cost.num_classes * cost.bytes_per_scalar);
  }
}

TEST(SimulateInferenceTest, ConservationAndPredictions) {
  std::mt19937_64 engine(2);
  for (std::size_t k : {1u, 2u, 3u}) {
    const std::size_t m = 4;
    const NmoeModel model = RandomModel(m, 5, 3, 3, 10 + k);
    const auto tests = RandomTests(m, 5, {7, 11, 3, 9}, engine);
    const CostModel cost{.bytes_per_scalar = 4, .latent_dim = 3,
                         .num_classes = 3};
    const auto res = SimulateInference(model, tests, k, cost);
    std::int64_t remote = 0;
    for (std::size_t c = 0; c < m; ++c) {
      EXPECT_EQ(res.log.RowTotal(c),
                static_cast<std::int64_t>(tests[c].size() * k));
      for (std::size_t e = 0; e < m; ++e) {
        if (e != c) remote += res.log.counts[c][e];
      }
      const auto direct = MoeForward(model, tests[c].features, {.k = k});
      EXPECT_EQ(res.logits[c], direct.logits);
      EXPECT_EQ(res.predictions[c], ArgmaxRows(direct.logits));
    }
    EXPECT_EQ(res.log.total(), 30 * static_cast<std::int64_t>(k));
    EXPECT_EQ(res.log.bytes_out, static_cast<std::uint64_t>(remote) * 3 * 4);
    EXPECT_EQ(res.log.bytes_back, static_cast<std::uint64_t>(remote) * 3 * 4);
  }
}

TEST(SimulateInferenceTest, FullFanOut) {
  std::mt19937_64 engine(3);
  const std::size_t m = 5;
  const NmoeModel model = RandomModel(m, 4, 2, 3, 20);
  const auto tests = RandomTests(m, 4, {3, 4, 5, 6, 7}, engine);
  const auto res = SimulateInference(
      model, tests, m, {.bytes_per_scalar = 4, .latent_dim = 2, .num_classes = 3});
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t e = 0; e < m; ++e) {
      EXPECT_EQ(res.log.counts[c][e], static_cast<std::int64_t>(tests[c].size()));
    }
  }
}

TEST(SimulateInferenceTest, UniformRandomRoutingIsRarelyLocal) {
  std::mt19937_64 engine(4);
  const std::size_t m = 10;
  NmoeModel model = RandomModel(m, 4, 2, 3, 30);
  model.gate = RandomGate::Uniform(m);
  const auto tests = RandomTests(m, 4, std::vector<std::size_t>(m, 500), engine);
  const auto res = SimulateInference(
      model, tests, 1, {.bytes_per_scalar = 4, .latent_dim = 2, .num_classes = 3},
      31);
  EXPECT_NEAR(LocalRatio(res.log), 0.1, 0.02);
}

TEST(SimulateInferenceTest, RejectsMismatches) {
  std::mt19937_64 engine(5);
  const NmoeModel model = RandomModel(3, 4, 2, 3, 40);
  const auto tests = RandomTests(2, 4, {3, 3}, engine);
  const CostModel cost{.bytes_per_scalar = 4, .latent_dim = 2, .num_classes = 3};
  EXPECT_THROW(SimulateInference(model, tests, 1, cost), Error);
  const auto three = RandomTests(3, 4, {3, 3, 3}, engine);
  EXPECT_THROW(SimulateInference(model, three, 1,
                                 {.bytes_per_scalar = 4, .latent_dim = 5,
                                  .num_classes = 3}),
               Error);
  EXPECT_THROW(SimulateInference(model, three, 1, {}), Error);
}

TEST(HeatmapTest, GoldenCsvAndManifest) {
  RoutingLog log(2);
  log.counts = {{3, 1}, {0, 2}};
  log.bytes_out = 8;
  log.bytes_back = 4;
  const auto dir = TempDir("heatmap");
  const auto path = dir / "heat.csv";
  ExportHeatmap(log, path, {.k = 1, .seed = 9, .config_hash = "abc"});
  EXPECT_EQ(ReadFile(path),
            "client,expert_0,expert_1\n"
            "0,0.750000,0.250000\n"
            "1,0.000000,1.000000\n");
  const auto manifest =
      nlohmann::json::parse(ReadFile(dir / "heat.csv.manifest.json"));
  EXPECT_EQ(manifest["config_hash"], "abc");
  EXPECT_EQ(manifest["seed"], 9);
  EXPECT_EQ(manifest["k"], 1);
  EXPECT_EQ(manifest["bytes_out"], 8);
  EXPECT_DOUBLE_EQ(manifest["local_ratio"].get<double>(), 5.0 / 6.0);
}

TEST(HeatmapTest, EmptyRowIsDataError) {
  RoutingLog log(2);
  log.counts = {{3, 1}, {0, 0}};
  try {
    RowNormalized(log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kData);
  }
  EXPECT_THROW(LocalRatio(RoutingLog(3)), Error);
}

TEST(DiagonalDominanceTest, MajorityOfRows) {
  RoutingLog log(3);
  log.counts = {{5, 1, 1}, {1, 5, 1}, {4, 4, 1}};
  EXPECT_TRUE(DiagonalDominant(log));
  log.counts = {{5, 1, 1}, {6, 5, 1}, {4, 4, 1}};
  EXPECT_FALSE(DiagonalDominant(log));
}

}  // namespace
}  // namespace nmoe
