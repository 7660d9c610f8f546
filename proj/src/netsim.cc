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

#include "nmoe/netsim.h"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "nmoe/error.h"
#include "nmoe/rng.h"

namespace nmoe {

void CostModel::Validate() const {
  Require(bytes_per_scalar > 0 && latent_dim > 0 && num_classes > 0,
          ErrorCode::kConfig, "cost model fields must be positive");
}

RoutingLog::RoutingLog(std::size_t num_clients)
    : counts(num_clients, std::vector<std::int64_t>(num_clients, 0)) {}

std::int64_t RoutingLog::total() const {
  std::int64_t t = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) t += RowTotal(c);
  return t;
}

std::int64_t RoutingLog::diagonal() const {
  std::int64_t t = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) t += counts[c][c];
  return t;
}

std::int64_t RoutingLog::RowTotal(std::size_t owner) const {
  std::int64_t t = 0;
  for (auto v : counts.at(owner)) t += v;
  return t;
}

void RecordSelection(RoutingLog& log, std::size_t owner, std::size_t expert,
                     const CostModel& cost) {
  Require(owner < log.num_clients() && expert < log.num_clients(),
          ErrorCode::kInternal, "routing outside the client range");
  ++log.counts[owner][expert];
  if (owner != expert) {
    log.bytes_out += cost.latent_dim * cost.bytes_per_scalar;
    log.bytes_back += cost.num_classes * cost.bytes_per_scalar;
  }
}

InferenceResult SimulateInference(const NmoeModel& model,
                                  std::span<const Dataset> test_sets,
                                  std::size_t k, const CostModel& cost,
                                  std::uint64_t seed) {
  model.Validate();
  cost.Validate();
  const std::size_t m = model.num_experts();
  Require(test_sets.size() == m, ErrorCode::kConfig,
          "need one test set per client/expert");
  Require(cost.latent_dim == model.latent_dim() &&
              cost.num_classes == model.num_classes(),
          ErrorCode::kConfig, "cost model does not match the model shape");
  InferenceResult result;
  result.log = RoutingLog(m);
  for (std::size_t c = 0; c < m; ++c) {
    // Everything below happens at client c except the expert evaluations.
    MoeOutput out = MoeForward(
        model, test_sets[c].features,
        {.k = k,
         .mode = Mode::kEval,
         .seed = DeriveSeed(seed, Stream::kRandomRoute, {c})});
    for (std::size_t e : out.gate.decision.indices) {
      RecordSelection(result.log, c, e, cost);
    }
    std::vector<int> pred(out.logits.rows());
    for (std::size_t r = 0; r < out.logits.rows(); ++r) {
      const auto row = out.logits.row(r);
      pred[r] = static_cast<int>(std::max_element(row.begin(), row.end()) -
                                 row.begin());
    }
    result.predictions.push_back(std::move(pred));
    result.logits.push_back(std::move(out.logits));
  }
  return result;
}

RoutingLog LocalOnlyLog(std::span<const std::size_t> samples_per_client) {
  RoutingLog log(samples_per_client.size());
  for (std::size_t c = 0; c < samples_per_client.size(); ++c) {
    log.counts[c][c] = static_cast<std::int64_t>(samples_per_client[c]);
  }
  return log;
}

double LocalRatio(const RoutingLog& log) {
  const std::int64_t total = log.total();
  Require(total > 0, ErrorCode::kData, "local ratio of an empty routing log");
  return static_cast<double>(log.diagonal()) / static_cast<double>(total);
}

Tensor2 RowNormalized(const RoutingLog& log) {
  const std::size_t m = log.num_clients();
  Tensor2 out(m, m);
  for (std::size_t c = 0; c < m; ++c) {
    const std::int64_t row = log.RowTotal(c);
    Require(row > 0, ErrorCode::kData,
            "routing log row " + std::to_string(c) + " is empty");
    for (std::size_t e = 0; e < m; ++e) {
      out(c, e) = static_cast<double>(log.counts[c][e]) /
                  static_cast<double>(row);
    }
  }
  return out;
}

bool DiagonalDominant(const RoutingLog& log) {
  const std::size_t m = log.num_clients();
  std::size_t dominant = 0;
  for (std::size_t c = 0; c < m; ++c) {
    bool ok = true;
    for (std::size_t e = 0; e < m; ++e) {
      if (e != c && log.counts[c][e] >= log.counts[c][c]) ok = false;
    }
    dominant += ok;
  }
  return 2 * dominant > m;
}

void ExportHeatmap(const RoutingLog& log, const std::filesystem::path& path,
                   const HeatmapManifest& manifest) {
  const Tensor2 norm = RowNormalized(log);
  std::ofstream out(path, std::ios::trunc);
  Require(out.is_open(), ErrorCode::kIo, "cannot write " + path.string());
  out << "client";
  for (std::size_t e = 0; e < log.num_clients(); ++e) out << ",expert_" << e;
  out << "\n";
  char buf[32];
  for (std::size_t c = 0; c < log.num_clients(); ++c) {
    out << c;
    for (std::size_t e = 0; e < log.num_clients(); ++e) {
      std::snprintf(buf, sizeof(buf), "%.6f", norm(c, e));
      out << ',' << buf;
    }
    out << "\n";
  }
  Require(out.good(), ErrorCode::kIo, "short write to " + path.string());

  const nlohmann::json m = {{"k", manifest.k},
                            {"seed", manifest.seed},
                            {"config_hash", manifest.config_hash},
                            {"clients", log.num_clients()},
                            {"total_selections", log.total()},
                            {"local_ratio", LocalRatio(log)},
                            {"bytes_out", log.bytes_out},
                            {"bytes_back", log.bytes_back}};
  const auto mpath = std::filesystem::path(path.string() + ".manifest.json");
  std::ofstream mout(mpath, std::ios::trunc);
  Require(mout.is_open(), ErrorCode::kIo, "cannot write " + mpath.string());
  mout << m.dump(2) << "\n";
  Require(mout.good(), ErrorCode::kIo, "short write to " + mpath.string());
}

}  // namespace nmoe
