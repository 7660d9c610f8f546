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

#include <string>
#include <vector>

#include "nmoe/error.h"
#include "nmoe/fed_train.h"
#include "nmoe/rng.h"
#include "train_context.h"

namespace nmoe {
namespace {

std::vector<double> ShardSizes(std::span<const Dataset> clients) {
  Require(!clients.empty(), ErrorCode::kConfig, "need at least one client");
  std::vector<double> sizes;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    Require(clients[i].size() > 0, ErrorCode::kData,
            "client " + std::to_string(i) + " has an empty training shard");
    sizes.push_back(static_cast<double>(clients[i].size()));
  }
  return sizes;
}

std::vector<std::size_t> AllClients(std::size_t m) {
  std::vector<std::size_t> ids(m);
  for (std::size_t i = 0; i < m; ++i) ids[i] = i;
  return ids;
}

void RequireSchedule(const FedSchedule& schedule) {
  Require(schedule.rounds > 0 && schedule.local_epochs > 0, ErrorCode::kConfig,
          "rounds and local epochs must be positive");
}

}  // namespace

Stage1Result Stage1FedCe(std::span<const Dataset> clients,
                         const MlpSpec& fe_spec, const MlpSpec& head_spec,
                         const FedSchedule& schedule, std::uint64_t seed) {
  RequireSchedule(schedule);
  const std::vector<double> sizes = ShardSizes(clients);
  const std::size_t m = clients.size();
  Stage1Result result;
  result.fe = InitMlp(fe_spec, DeriveSeed(seed, Stream::kFeInit));
  for (std::size_t i = 0; i < m; ++i) {
    result.heads.push_back(
        InitMlp(head_spec, DeriveSeed(seed, Stream::kHeadInit, {i})));
  }
  const std::uint64_t round_bytes = static_cast<std::uint64_t>(m) * 2 *
                                    result.fe.NumScalars() *
                                    schedule.bytes_per_scalar;
  for (std::size_t r = 0; r < schedule.rounds; ++r) {
    internal::Stopwatch clock;
    FedRoundReport report;
    report.stage = "stage1_fedce";
    report.round = r;
    report.participants = AllClients(m);
    std::vector<ParamSet> locals;
    for (std::size_t i = 0; i < m; ++i) {
      ParamSet fe = result.fe;
      double loss = 0.0;
      for (std::size_t e = 0; e < schedule.local_epochs; ++e) {
        loss = internal::InContext("stage1 fedce", i, r, [&] {
          return ClassifierEpoch(
              &fe_spec, &fe, head_spec, result.heads[i], clients[i].features,
              clients[i].labels, schedule.sgd,
              EpochSeed(seed, Phase::kStage1, i,
                        r * schedule.local_epochs + e));
        });
      }
      report.client_losses.push_back(loss);
      locals.push_back(std::move(fe));
    }
    result.fe = FedAvg(locals, sizes);
    report.params_hash = HashHex(result.fe.Hash());
    report.bytes = round_bytes;
    report.wall_seconds = clock.Seconds();
    result.reports.push_back(std::move(report));
  }
  return result;
}

Stage1Result CentralizedCe(const Dataset& data, const MlpSpec& fe_spec,
                           const MlpSpec& head_spec,
                           const FedSchedule& schedule, std::uint64_t seed,
                           Phase phase, std::size_t client) {
  RequireSchedule(schedule);
  Require(data.size() > 0, ErrorCode::kData, "empty training set");
  Stage1Result result;
  result.fe = InitMlp(fe_spec, DeriveSeed(seed, Stream::kFeInit));
  result.heads.push_back(
      InitMlp(head_spec, DeriveSeed(seed, Stream::kHeadInit, {client})));
  const std::size_t epochs = schedule.rounds * schedule.local_epochs;
  for (std::size_t e = 0; e < epochs; ++e) {
    internal::Stopwatch clock;
    const double loss = internal::InContext(
        "centralized ce", client, e / schedule.local_epochs, [&] {
          return ClassifierEpoch(&fe_spec, &result.fe, head_spec,
                                 result.heads[0], data.features, data.labels,
                                 schedule.sgd,
                                 EpochSeed(seed, phase, client, e));
        });
    if ((e + 1) % schedule.local_epochs == 0) {
      FedRoundReport report;
      report.stage = "centralized_ce";
      report.round = e / schedule.local_epochs;
      report.participants = {client};
      report.client_losses = {loss};
      report.params_hash = HashHex(result.fe.Hash());
      report.wall_seconds = clock.Seconds();
      result.reports.push_back(std::move(report));
    }
  }
  return result;
}

Stage1Result Stage1FedSc(std::span<const Dataset> clients,
                         const MlpSpec& fe_spec, const FedSchedule& schedule,
                         const FedScOptions& options, std::uint64_t seed) {
  RequireSchedule(schedule);
  options.augment.Validate();
  Require(options.dp_noise_std >= 0.0, ErrorCode::kConfig,
          "DP noise std must be >= 0");
  const std::vector<double> sizes = ShardSizes(clients);
  const std::size_t m = clients.size();
  double total = 0.0;
  for (double s : sizes) total += s;
  std::vector<double> q;
  for (double s : sizes) q.push_back(s / total);

  Stage1Result result;
  result.fe = InitMlp(fe_spec, DeriveSeed(seed, Stream::kFeInit));
  const std::uint64_t d = fe_spec.output_width();
  const std::uint64_t round_bytes =
      static_cast<std::uint64_t>(m) *
      (2 * result.fe.NumScalars() + 2 * d * d) * schedule.bytes_per_scalar;
  for (std::size_t r = 0; r < schedule.rounds; ++r) {
    internal::Stopwatch clock;
    FedRoundReport report;
    report.stage = "stage1_fedsc";
    report.round = r;
    report.participants = AllClients(m);
    std::vector<Tensor2> shared;
    for (std::size_t i = 0; i < m; ++i) {
      shared.push_back(internal::InContext("stage1 fedsc", i, r, [&] {
        return ShareCorrelation(fe_spec, result.fe, clients[i], i, q[i],
                                options, seed, r)
            .shared;
      }));
    }
    std::vector<ParamSet> locals;
    for (std::size_t i = 0; i < m; ++i) {
      const Tensor2 rbar = AggregateOthers(shared, q, i);
      ParamSet fe = result.fe;
      double loss = 0.0;
      for (std::size_t e = 0; e < schedule.local_epochs; ++e) {
        loss = internal::InContext("stage1 fedsc", i, r, [&] {
          return SpectralEpoch(fe_spec, fe, clients[i].features, rbar, q[i],
                               options, schedule.sgd, seed, Phase::kStage1, i,
                               r * schedule.local_epochs + e);
        });
      }
      report.client_losses.push_back(loss);
      locals.push_back(std::move(fe));
    }
    result.fe = FedAvg(locals, sizes);
    report.params_hash = HashHex(result.fe.Hash());
    report.bytes = round_bytes;
    report.wall_seconds = clock.Seconds();
    result.reports.push_back(std::move(report));
  }
  return result;
}

Stage1Result CentralizedSc(const Dataset& data, const MlpSpec& fe_spec,
                           const FedSchedule& schedule,
                           const FedScOptions& options, std::uint64_t seed) {
  RequireSchedule(schedule);
  options.augment.Validate();
  Require(data.size() > 0, ErrorCode::kData, "empty training set");
  Stage1Result result;
  result.fe = InitMlp(fe_spec, DeriveSeed(seed, Stream::kFeInit));
  const std::size_t d = fe_spec.output_width();
  const Tensor2 zero(d, d);
  const std::size_t epochs = schedule.rounds * schedule.local_epochs;
  for (std::size_t e = 0; e < epochs; ++e) {
    internal::Stopwatch clock;
    const double loss = internal::InContext(
        "centralized sc", 0, e / schedule.local_epochs, [&] {
          return SpectralEpoch(fe_spec, result.fe, data.features, zero, 1.0,
                               options, schedule.sgd, seed, Phase::kStage1, 0,
                               e);
        });
    if ((e + 1) % schedule.local_epochs == 0) {
      FedRoundReport report;
      report.stage = "centralized_sc";
      report.round = e / schedule.local_epochs;
      report.participants = {0};
      report.client_losses = {loss};
      report.params_hash = HashHex(result.fe.Hash());
      report.wall_seconds = clock.Seconds();
      result.reports.push_back(std::move(report));
    }
  }
  return result;
}

}  // namespace nmoe
