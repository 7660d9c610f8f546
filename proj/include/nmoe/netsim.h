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

#ifndef NMOE_NETSIM_H_
#define NMOE_NETSIM_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nmoe/datasets.h"
#include "nmoe/moe.h"
#include "nmoe/tensor.h"

namespace nmoe {

struct CostModel {
  std::size_t bytes_per_scalar = 4;
  std::size_t latent_dim = 0;
  std::size_t num_classes = 0;

  // Throws kConfig unless every field is positive.
  void Validate() const;
};

// counts[c][e]: selections of expert e for samples owned by client c.
struct RoutingLog {
  std::vector<std::vector<std::int64_t>> counts;
  std::uint64_t bytes_out = 0;   // latents sent to remote experts
  std::uint64_t bytes_back = 0;  // remote expert outputs returned

  explicit RoutingLog(std::size_t num_clients = 0);
  std::size_t num_clients() const { return counts.size(); }
  std::int64_t total() const;
  std::int64_t diagonal() const;
  std::int64_t RowTotal(std::size_t owner) const;
};

// Adds one routed selection: owner's sample goes to expert. Remote
// selections pay latent_dim scalars out and num_classes scalars back.
void RecordSelection(RoutingLog& log, std::size_t owner, std::size_t expert,
                     const CostModel& cost);

struct InferenceResult {
  std::vector<Tensor2> logits;  // per client, aggregated at the owner
  std::vector<std::vector<int>> predictions;
  RoutingLog log;
};

// Eval-mode inference of every client's test set. Client c owns test set c
// and hosts expert c. `seed` only matters for a random gate.
InferenceResult SimulateInference(const NmoeModel& model,
                                  std::span<const Dataset> test_sets,
                                  std::size_t k, const CostModel& cost,
                                  std::uint64_t seed = 0);

// Routing log of a system that never leaves the owning client.
RoutingLog LocalOnlyLog(std::span<const std::size_t> samples_per_client);

// trace(counts) / total(counts). Throws kData on an empty log.
double LocalRatio(const RoutingLog& log);

// Row-normalized counts. Throws kData if any row is all zero.
Tensor2 RowNormalized(const RoutingLog& log);

// True when, for a majority of rows, the diagonal count exceeds every
// off-diagonal count in that row.
bool DiagonalDominant(const RoutingLog& log);

struct HeatmapManifest {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// Writes RowNormalized(log) as CSV (header "client,expert_0,...", one row per
// client, 6 decimals) to `path` and the manifest as JSON to
// `path` + ".manifest.json". Throws kIo on write failure.
void ExportHeatmap(const RoutingLog& log, const std::filesystem::path& path,
                   const HeatmapManifest& manifest);

}  // namespace nmoe

#endif  // NMOE_NETSIM_H_
