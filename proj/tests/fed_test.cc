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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "nmoe/datasets.h"
#include "nmoe/error.h"
#include "nmoe/fed_train.h"
#include "nmoe/ops.h"
#include "test_util.h"

namespace nmoe {
namespace {

using ::nmoe::testing::CentralDifferences;
using ::nmoe::testing::MaxRelError;
using ::nmoe::testing::RandomTensor;

ParamSet Scalar(double v) {
  ParamSet p;
  p.Add("w", Tensor2(1, 1, {v}));
  return p;
}

ParamSet RandomParams(std::mt19937_64& engine) {
  ParamSet p;
  p.Add("a", RandomTensor(3, 4, engine));
  p.Add("b", RandomTensor(1, 4, engine));
  return p;
}

// Small non-IID split of a synthetic pool.
std::vector<Shard> SmallShards(std::size_t clients, double tau,
                               std::uint64_t seed, std::size_t train = 120,
                               std::size_t test = 60, std::size_t dim = 6,
                               int classes = 4) {
  SyntheticSpec spec{.num_classes = classes,
                     .dim = dim,
                     .samples_per_class = 600,
                     .spread = 1.0,
                     .radius = 3.0};
  const Dataset pool = GenSynthetic(spec, seed);
  return PartitionNonIid(pool,
                         {.num_clients = clients,
                          .tau = tau,
                          .train_per_client = train,
                          .test_per_client = test},
                         seed);
}

std::vector<Dataset> Trains(const std::vector<Shard>& shards) {
  std::vector<Dataset> out;
  for (const auto& s : shards) out.push_back(s.train);
  return out;
}

double GlobalObjectiveOracle(const Tensor2& z1, const Tensor2& z2) {
  // 1/2 * mean over all pairs of the 2n rows of (z_a . z_b)^2, minus the
  // mean positive-pair inner product.
  std::vector<std::span<const double>> rows;
  for (std::size_t r = 0; r < z1.rows(); ++r) rows.push_back(z1.row(r));
  for (std::size_t r = 0; r < z2.rows(); ++r) rows.push_back(z2.row(r));
  const double big_n = static_cast<double>(rows.size());
  double quad = 0.0;
  for (const auto& a : rows) {
    for (const auto& b : rows) {
      double dot = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) dot += a[j] * b[j];
      quad += dot * dot;
    }
  }
  double pos = 0.0;
  for (std::size_t r = 0; r < z1.rows(); ++r) {
    for (std::size_t j = 0; j < z1.cols(); ++j) pos += z1(r, j) * z2(r, j);
  }
  return 0.5 * quad / (big_n * big_n) - pos / static_cast<double>(z1.rows());
}

TEST(FedAvgTest, Fixtures) {
  const std::vector<ParamSet> sets = {Scalar(1.0), Scalar(3.0)};
  const std::vector<double> equal = {1.0, 1.0};
  EXPECT_EQ(FedAvg(sets, equal).Get("w")(0, 0), 2.0);
  const std::vector<ParamSet> sets2 = {Scalar(0.0), Scalar(4.0)};
  const std::vector<double> sizes = {100.0, 300.0};
  EXPECT_EQ(FedAvg(sets2, sizes).Get("w")(0, 0), 3.0);
}

TEST(FedAvgTest, SingleSetIsBitIdentity) {
  std::mt19937_64 engine(1);
  ParamSet p = RandomParams(engine);
  p.Get("a")(0, 0) = -0.0;
  const std::vector<ParamSet> sets = {p};
  const std::vector<double> w = {2500.0};
  const ParamSet out = FedAvg(sets, w);
  EXPECT_EQ(out.Hash(), p.Hash());
  EXPECT_TRUE(std::signbit(out.Get("a")(0, 0)));
}

TEST(FedAvgTest, PermutationInvariantAndIdempotent) {
  std::mt19937_64 engine(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ParamSet> sets;
    std::vector<double> w;
    for (int i = 0; i < 5; ++i) {
      sets.push_back(RandomParams(engine));
      w.push_back(1.0 + static_cast<double>(engine() % 100));
    }
    const ParamSet base = FedAvg(sets, w);
    std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    std::vector<ParamSet> ps;
    std::vector<double> pw;
    for (auto i : perm) {
      ps.push_back(sets[i]);
      pw.push_back(w[i]);
    }
    const ParamSet permuted = FedAvg(ps, pw);
    for (std::size_t e = 0; e < base.size(); ++e) {
      const auto& a = base.entries()[e].tensor.data();
      const auto& b = permuted.entries()[e].tensor.data();
      for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
    }
    const std::vector<ParamSet> same(4, sets[0]);
    const ParamSet idem = FedAvg(same, std::vector<double>{1, 2, 3, 4});
    for (std::size_t e = 0; e < idem.size(); ++e) {
      const auto& a = idem.entries()[e].tensor.data();
      const auto& b = sets[0].entries()[e].tensor.data();
      for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-15);
    }
  }
}

TEST(FedAvgTest, RejectsBadInputs) {
  const std::vector<ParamSet> sets = {Scalar(1.0), Scalar(2.0)};
  for (const auto& w : {std::vector<double>{0.0, 0.0},
                        std::vector<double>{-1.0, 2.0},
                        std::vector<double>{1.0}}) {
    try {
      FedAvg(sets, w);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kConfig);
    }
  }
  ParamSet other;
  other.Add("w", Tensor2(1, 2));
  const std::vector<ParamSet> mismatched = {Scalar(1.0), other};
  EXPECT_THROW(FedAvg(mismatched, std::vector<double>{1, 1}), Error);
}

TEST(SpectralLossTest, UnitVectorFixture) {
  const Tensor2 e1 = Tensor2::FromRows({{1.0, 0.0}});
  const auto out = SpectralContrastiveLocalLoss(e1, e1, Tensor2(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(out.loss, -0.5);
}

TEST(SpectralLossTest, SingleClientEqualsGlobalObjective) {
  std::mt19937_64 engine(3);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1 + engine() % 12, d = 1 + engine() % 6;
    const Tensor2 z1 = RandomTensor(n, d, engine);
    const Tensor2 z2 = RandomTensor(n, d, engine);
    const Tensor2 rbar = RandomTensor(d, d, engine);  // ignored at q = 1
    const double loss = SpectralContrastiveLocalLoss(z1, z2, rbar, 1.0).loss;
    EXPECT_NEAR(loss, GlobalObjectiveOracle(z1, z2), 1e-12) << trial;
  }
}

TEST(SpectralLossTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 engine(4);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 2 + engine() % 6, d = 1 + engine() % 5;
    Tensor2 z1 = RandomTensor(n, d, engine);
    Tensor2 z2 = RandomTensor(n, d, engine);
    const Tensor2 rbar = RandomTensor(d, d, engine);  // deliberately asymmetric
    const double q = unit(engine);
    const auto out = SpectralContrastiveLocalLoss(z1, z2, rbar, q);
    auto f = [&] { return SpectralContrastiveLocalLoss(z1, z2, rbar, q).loss; };
    const auto g1 = CentralDifferences(z1.data(), f);
    const auto g2 = CentralDifferences(z2.data(), f);
    EXPECT_LT(MaxRelError(out.grad_z1.data(), g1), 1e-4) << trial;
    EXPECT_LT(MaxRelError(out.grad_z2.data(), g2), 1e-4) << trial;
  }
}

TEST(SpectralLossTest, RejectsShapeMismatch) {
  EXPECT_THROW(
      SpectralContrastiveLocalLoss(Tensor2(2, 3), Tensor2(2, 2), Tensor2(3, 3),
                                   0.5),
      Error);
  EXPECT_THROW(SpectralContrastiveLocalLoss(Tensor2(2, 3), Tensor2(2, 3),
                                            Tensor2(2, 2), 0.5),
               Error);
}

TEST(CorrelationTest, MatchesOuterProductMeanAndIsSymmetric) {
  std::mt19937_64 engine(5);
  const Tensor2 z = RandomTensor(9, 4, engine);
  const Tensor2 r = CorrelationMatrix(z);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < 9; ++i) s += z(i, a) * z(i, b);
      EXPECT_NEAR(r(a, b), s / 9.0, 1e-14);
      EXPECT_EQ(r(a, b), r(b, a));
    }
  }
}

TEST(AggregateOthersTest, WeightedMeanOfOtherClients) {
  const std::vector<Tensor2> shares = {Tensor2(1, 1, {1.0}),
                                       Tensor2(1, 1, {2.0}),
                                       Tensor2(1, 1, {4.0})};
  const std::vector<double> q = {0.5, 0.25, 0.25};
  // Others of client 0: (0.25 * 2 + 0.25 * 4) / 0.5 = 3.
  EXPECT_DOUBLE_EQ(AggregateOthers(shares, q, 0)(0, 0), 3.0);
  // Others of client 1: (0.5 * 1 + 0.25 * 4) / 0.75 = 2.
  EXPECT_DOUBLE_EQ(AggregateOthers(shares, q, 1)(0, 0), 2.0);
  const std::vector<Tensor2> one = {Tensor2(1, 1, {7.0})};
  EXPECT_EQ(AggregateOthers(one, std::vector<double>{1.0}, 0)(0, 0), 0.0);
  try {
    AggregateOthers(shares, std::vector<double>{1.0, 0.0, 0.0}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInternal);
  }
}

TEST(ShareCorrelationTest, DpNoiseHasExpectedFrobeniusNorm) {
  const auto shards = SmallShards(1, 0.5, 6);
  const MlpSpec spec = MlpSpec::Make({6, 8, 16});
  const ParamSet fe = InitMlp(spec, 7);
  FedScOptions opts;
  opts.dp_noise_std = 0.0;
  const auto clean = ShareCorrelation(spec, fe, shards[0].train, 0, 1.0, opts, 8, 0);
  EXPECT_EQ(clean.clean, clean.shared);
  opts.dp_noise_std = 0.05;
  double mean = 0.0;
  const int rounds = 40;
  for (int r = 0; r < rounds; ++r) {
    const auto s = ShareCorrelation(spec, fe, shards[0].train, 0, 1.0, opts, 8, r);
    double sq = 0.0;
    for (std::size_t i = 0; i < s.shared.size(); ++i) {
      const double d = s.shared.data()[i] - s.clean.data()[i];
      sq += d * d;
    }
    mean += std::sqrt(sq) / rounds;
  }
  EXPECT_NEAR(mean, 0.05 * 16, 0.05 * 16 * 0.05);
}

TEST(DegeneracyTest, FedCeWithOneClientEqualsCentralized) {
  const auto shards = SmallShards(1, 0.5, 9);
  const auto clients = Trains(shards);
  const MlpSpec fe = MlpSpec::Make({6, 8, 4});
  const MlpSpec head = MlpSpec::Make({4, 8, 4});
  const FedSchedule sched{.rounds = 3, .local_epochs = 2,
                          .sgd = {.lr = 0.05, .batch_size = 16}};
  const auto fed = Stage1FedCe(clients, fe, head, sched, 10);
  const auto cen = CentralizedCe(clients[0], fe, head, sched, 10);
  EXPECT_EQ(fed.fe.Hash(), cen.fe.Hash());
  EXPECT_EQ(fed.fe, cen.fe);
  EXPECT_EQ(fed.heads.at(0), cen.heads.at(0));
  ASSERT_EQ(fed.reports.size(), cen.reports.size());
  for (std::size_t r = 0; r < fed.reports.size(); ++r) {
    EXPECT_EQ(fed.reports[r].params_hash, cen.reports[r].params_hash);
    EXPECT_EQ(fed.reports[r].client_losses, cen.reports[r].client_losses);
  }
}

TEST(DegeneracyTest, FedScWithOneClientEqualsCentralized) {
  const auto shards = SmallShards(1, 0.5, 11);
  const auto clients = Trains(shards);
  const MlpSpec fe = MlpSpec::Make({6, 8, 4});
  const FedSchedule sched{.rounds = 3, .local_epochs = 2,
                          .sgd = {.lr = 0.02, .batch_size = 16,
                                  .max_grad_norm = 1.0}};
  for (double dp : {0.0, 0.05}) {
    FedScOptions opts;
    opts.dp_noise_std = dp;
    const auto fed = Stage1FedSc(clients, fe, sched, opts, 12);
    const auto cen = CentralizedSc(clients[0], fe, sched, opts, 12);
    EXPECT_EQ(fed.fe.Hash(), cen.fe.Hash()) << dp;
    EXPECT_EQ(fed.fe, cen.fe);
  }
}

NmoeModel SmallModel(const std::vector<Dataset>& clients, std::uint64_t seed,
                     std::size_t dim = 6, int classes = 4) {
  NmoeModel model;
  model.fe_spec = MlpSpec::Make({dim, 8, 4});
  model.fe = InitMlp(model.fe_spec, seed);
  model.expert_spec =
      MlpSpec::Make({4, 8, static_cast<std::size_t>(classes)});
  const auto experts = Stage2Experts(clients, model.fe_spec, model.fe,
                                     model.expert_spec,
                                     {.epochs = 3, .sgd = {.batch_size = 16}},
                                     seed);
  model.experts = experts.experts;
  model.gate = LinearGate::Init(4, clients.size(), seed + 1);
  return model;
}

TEST(DegeneracyTest, FedGateWithOneClientEqualsCentralized) {
  const auto shards = SmallShards(1, 0.5, 13);
  const auto clients = Trains(shards);
  const NmoeModel model = SmallModel(clients, 14);
  FedGateOptions opts;
  opts.rounds = 3;
  opts.sgd.batch_size = 16;
  const auto fed = Stage3FedGate(clients, model, opts, 15);
  const auto cen = CentralizedGate(clients[0], model, opts, 15);
  EXPECT_EQ(fed.gate.params.Hash(), cen.gate.params.Hash());
  EXPECT_EQ(fed.gate.params, cen.gate.params);
  EXPECT_EQ(fed.round_losses, cen.round_losses);
}

TEST(Stage1Test, ReportsAndByteFormulas) {
  const auto shards = SmallShards(3, 0.3, 16);
  const auto clients = Trains(shards);
  const MlpSpec fe = MlpSpec::Make({6, 8, 4});
  const MlpSpec head = MlpSpec::Make({4, 4});
  const FedSchedule sched{.rounds = 2, .local_epochs = 1,
                          .sgd = {.batch_size = 32, .max_grad_norm = 1.0}};
  const std::uint64_t fe_scalars = 6 * 8 + 8 + 8 * 4 + 4;
  const auto ce = Stage1FedCe(clients, fe, head, sched, 17);
  ASSERT_EQ(ce.reports.size(), 2u);
  for (const auto& r : ce.reports) {
    EXPECT_EQ(r.participants, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(r.bytes, 3 * 2 * fe_scalars * 4);
  }
  const auto sc = Stage1FedSc(clients, fe, sched, {}, 17);
  for (const auto& r : sc.reports) {
    // R_i up and rbar_{-i} down, d x d each.
    EXPECT_EQ(r.bytes, 3 * (2 * fe_scalars + 2 * 4 * 4) * 4);
  }
}

TEST(Stage1Test, DivergenceNamesClientAndRound) {
  const auto shards = SmallShards(2, 0.3, 18);
  const auto clients = Trains(shards);
  const MlpSpec fe = MlpSpec::Make({6, 8, 4});
  const MlpSpec head = MlpSpec::Make({4, 4});
  const FedSchedule sched{.rounds = 5, .local_epochs = 1,
                          .sgd = {.lr = 1e6, .batch_size = 8}};
  try {
    Stage1FedCe(clients, fe, head, sched, 19);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTraining);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("client"), std::string::npos) << msg;
    EXPECT_NE(msg.find("round"), std::string::npos) << msg;
  }
}

double LinearProbe(const MlpSpec& fe_spec, const ParamSet& fe,
                   const Dataset& train, const Dataset& test) {
  const Tensor2 htr = MlpApply(fe_spec, fe, train.features);
  const MlpSpec head =
      MlpSpec::Make({fe_spec.output_width(),
                     static_cast<std::size_t>(train.num_classes)});
  ParamSet p = InitMlp(head, 20);
  for (std::size_t e = 0; e < 40; ++e) {
    ClassifierEpoch(nullptr, nullptr, head, p, htr, train.labels,
                    {.lr = 0.05, .batch_size = 32}, 100 + e);
  }
  return ClassifierAccuracy(&fe_spec, &fe, head, p, test.features,
                            test.labels);
}

TEST(Stage1Test, FedCeFeaturesBeatRandomFeaturesOnLinearProbe) {
  // IID split; a two-dimensional latent makes random features lossy.
  SyntheticSpec spec{.num_classes = 10, .dim = 16, .samples_per_class = 300};
  const Dataset pool = GenSynthetic(spec, 21);
  const auto shards = PartitionNonIid(
      pool, {.num_clients = 10, .tau = 0.3, .train_per_client = 200,
             .test_per_client = 80, .iid = true},
      21);
  const auto clients = Trains(shards);
  std::vector<Dataset> tests;
  for (const auto& s : shards) tests.push_back(s.test);
  const Dataset train = Concat(clients), test = Concat(tests);
  const MlpSpec fe = MlpSpec::Make({16, 32, 2});
  const MlpSpec head = MlpSpec::Make({2, 16, 10});
  const FedSchedule sched{.rounds = 15, .local_epochs = 2,
                          .sgd = {.lr = 0.05, .batch_size = 32}};
  const auto trained = Stage1FedCe(clients, fe, head, sched, 22);
  const double fed = LinearProbe(fe, trained.fe, train, test);
  const double random = LinearProbe(fe, InitMlp(fe, 22), train, test);
  EXPECT_GE(fed - random, 0.20) << "trained " << fed << " random " << random;
}

TEST(Stage2Test, LocalOnlyAndFrozenExtractor) {
  auto shards = SmallShards(3, 0.2, 23);
  auto clients = Trains(shards);
  const MlpSpec fe_spec = MlpSpec::Make({6, 8, 4});
  const ParamSet fe = InitMlp(fe_spec, 24);
  const MlpSpec expert = MlpSpec::Make({4, 16, 4});
  const Stage2Options opts{.epochs = 15, .sgd = {.batch_size = 16}};
  const auto a = Stage2Experts(clients, fe_spec, fe, expert, opts, 25);
  EXPECT_EQ(a.bytes, 0u);
  // Changing shard 2 leaves experts 0 and 1 untouched.
  clients[2] = shards[1].train;
  const auto b = Stage2Experts(clients, fe_spec, fe, expert, opts, 25);
  EXPECT_EQ(a.experts[0], b.experts[0]);
  EXPECT_EQ(a.experts[1], b.experts[1]);
  EXPECT_NE(a.experts[2], b.experts[2]);
}

TEST(Stage2Test, ExpertsArePersonalized) {
  const auto shards = SmallShards(4, 0.1, 26, 200, 100);
  const auto clients = Trains(shards);
  const MlpSpec fe_spec = MlpSpec::Make({6, 16, 8});
  const ParamSet fe = InitMlp(fe_spec, 27);
  const MlpSpec expert = MlpSpec::Make({8, 16, 4});
  const auto r = Stage2Experts(clients, fe_spec, fe, expert,
                               {.epochs = 30, .sgd = {.batch_size = 16}}, 28);
  for (std::size_t i = 0; i < 4; ++i) {
    const double own = ClassifierAccuracy(&fe_spec, &fe, expert, r.experts[i],
                                          shards[i].test.features,
                                          shards[i].test.labels);
    for (std::size_t j = 0; j < 4; ++j) {
      if (j == i) continue;
      const double other = ClassifierAccuracy(
          &fe_spec, &fe, expert, r.experts[j], shards[i].test.features,
          shards[i].test.labels);
      EXPECT_GT(own, other) << "client " << i << " expert " << j;
    }
  }
}

TEST(RanGateTest, UniformPointMassAndPair) {
  const RandomGate uniform = Stage3RanGate(10);
  for (double p : uniform.distribution) EXPECT_DOUBLE_EQ(p, 0.1);
  const std::size_t draws = 100000;
  const auto out = RouteRandom(draws, uniform, 1, 29);
  std::vector<double> freq(10);
  for (auto e : out.decision.indices) freq[e] += 1.0 / draws;
  for (double f : freq) EXPECT_NEAR(f, 0.1, 4.0 * std::sqrt(0.09 / draws));
  const RandomGate point{{0.0, 0.0, 1.0}};
  for (auto e : RouteRandom(100, point, 1, 30).decision.indices) EXPECT_EQ(e, 2u);
  const RandomGate pair{{0.5, 0.5}};
  const auto both = RouteRandom(50, pair, 2, 31);
  for (std::size_t r = 0; r < 50; ++r) {
    auto idx = both.decision.Indices(r);
    EXPECT_NE(idx[0], idx[1]);
  }
}

TEST(RollGateTest, PseudoLabelCounts) {
  const auto counts = PseudoLabelCounts(1000, 0, 10, 0.7);
  EXPECT_EQ(counts[0], 700u);
  EXPECT_EQ(std::count(counts.begin(), counts.end(), 34u), 3);
  EXPECT_EQ(std::count(counts.begin(), counts.end(), 33u), 6);
  EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}),
            1000u);
  EXPECT_THROW(PseudoLabelCounts(10, 0, 10, 1.0), Error);
  EXPECT_THROW(PseudoLabelCounts(10, 0, 1, 0.7), Error);
}

TEST(RollGateTest, SeparableClientsRouteHome) {
  // Client 0 lives around +6 e_0, client 1 around -6 e_0.
  std::mt19937_64 engine(32);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto make = [&](double center, std::size_t n) {
    Dataset d;
    d.num_classes = 2;
    d.features = Tensor2(n, 4);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < 4; ++c) d.features(r, c) = noise(engine);
      d.features(r, 0) += center;
      d.labels.push_back(static_cast<int>(r % 2));
    }
    return d;
  };
  const std::vector<Dataset> train = {make(6.0, 300), make(-6.0, 300)};
  const std::vector<Dataset> test = {make(6.0, 200), make(-6.0, 200)};
  const MlpSpec fe_spec = MlpSpec::Make({4, 4});
  ParamSet fe;
  fe.Add("layer0.weight", Tensor2::Identity(4));
  fe.Add("layer0.bias", Tensor2(1, 4));
  RollGateOptions opts;
  opts.p = 0.99;
  opts.sgd.batch_size = 16;
  const auto r = Stage3RollGate(train, fe_spec, fe,
                                LinearGate::Init(4, 2, 33), opts, 34);
  EXPECT_FALSE(r.reports.empty());
  for (std::size_t c = 0; c < 2; ++c) {
    const auto g = GateTopK(test[c].features, r.gate, 1, std::nullopt);
    std::size_t home = 0;
    for (auto e : g.decision.indices) home += e == c;
    EXPECT_GE(home, 190u) << "client " << c;
  }
  EXPECT_EQ(r.reports[0].bytes, 2 * (4 * 2 + 2) * 4u);
}

TEST(FedGateTest, SamplesSevenOfTenWithUniformCoverage) {
  std::vector<int> seen(10, 0);
  for (std::size_t round = 0; round < 200; ++round) {
    const auto ids = SampleClients(10, 0.7, 35, round);
    ASSERT_EQ(ids.size(), 7u);
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
    for (auto i : ids) ++seen[i];
  }
  // Binomial(200, 0.7): mean 140, sd ~6.5.
  for (int s : seen) EXPECT_NEAR(s, 140, 26);
  EXPECT_EQ(SampleClients(10, 1.0, 35, 0).size(), 10u);
  EXPECT_EQ(SampleClients(3, 0.01, 35, 0).size(), 1u);
  EXPECT_THROW(SampleClients(10, 0.0, 35, 0), Error);
}

TEST(FedGateTest, FrozenPiecesAndAccounting) {
  const auto shards = SmallShards(4, 0.3, 36);
  const auto clients = Trains(shards);
  const NmoeModel model = SmallModel(clients, 37);
  FedGateOptions opts;
  opts.rounds = 3;
  opts.sgd.batch_size = 32;
  const auto r = Stage3FedGate(clients, model, opts, 38);
  ASSERT_EQ(r.reports.size(), 3u);
  const std::uint64_t gate_bytes = (4 * 4 + 4) * 4;
  std::uint64_t expert_bytes = 0;
  for (const auto& e : model.experts) expert_bytes += e.NumScalars() * 4;
  for (const auto& rep : r.reports) {
    EXPECT_EQ(rep.participants.size(), 3u);  // ceil(0.7 * 4)
    EXPECT_EQ(rep.bytes, 3 * 2 * gate_bytes + (rep.round == 0 ? expert_bytes : 0));
  }
  EXPECT_NE(r.gate.params, std::get<LinearGate>(model.gate).params);
  NmoeModel wrong = model;
  wrong.gate = RandomGate::Uniform(4);
  EXPECT_THROW(Stage3FedGate(clients, wrong, opts, 38), Error);
  opts.k = 5;
  EXPECT_THROW(Stage3FedGate(clients, model, opts, 38), Error);
}

}  // namespace
}  // namespace nmoe
