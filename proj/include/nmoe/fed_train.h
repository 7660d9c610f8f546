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

#ifndef NMOE_FED_TRAIN_H_
#define NMOE_FED_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nmoe/datasets.h"
#include "nmoe/mlp.h"
#include "nmoe/moe.h"
#include "nmoe/param_set.h"
#include "nmoe/tensor.h"

namespace nmoe {

// Seed-derivation tag for each training phase. Part of every shuffle, noise
// and augmentation key, so stages never share random streams.
enum class Phase : std::uint64_t {
  kStage1 = 1,
  kStage2 = 2,
  kStage3 = 3,
  kCentralizedMoe = 4,
  kLocalClassifier = 5,
  kFedAvgClassifier = 6,
};

struct FedRoundReport {
  std::string stage;
  std::size_t round = 0;
  std::vector<std::size_t> participants;  // ascending client ids
  std::vector<double> client_losses;      // aligned with participants
  std::string params_hash;                // aggregated parameters after round
  std::uint64_t bytes = 0;                // communication this round
  double wall_seconds = 0.0;              // kept out of results records
};

std::uint64_t TotalBytes(std::span<const FedRoundReport> reports);

// Weighted elementwise mean with weights normalized to sum 1. Accumulates in
// ascending index order starting from the first weighted term. Throws kConfig
// on incompatible shapes, negative weights or a zero weight sum.
ParamSet FedAvg(std::span<const ParamSet> sets, std::span<const double> weights);

struct SgdOptions {
  double lr = 0.05;
  std::size_t batch_size = 64;
  double weight_decay = 0.0;
  // Global gradient-norm clip before each step; nullopt disables it.
  std::optional<double> max_grad_norm;
};

// One epoch of minibatch SGD on cross-entropy of head(fe(x)). Rows are
// visited in the order Permutation(n, shuffle_seed) gives. With fe == nullptr
// the inputs are already latents and only the head trains. Returns the
// sample-weighted mean loss; throws kTraining on a non-finite loss.
double ClassifierEpoch(const MlpSpec* fe_spec, ParamSet* fe,
                       const MlpSpec& head_spec, ParamSet& head,
                       const Tensor2& inputs, std::span<const int> labels,
                       const SgdOptions& options, std::uint64_t shuffle_seed);

// Shuffle seed for (phase, client, global epoch).
std::uint64_t EpochSeed(std::uint64_t seed, Phase phase, std::size_t client,
                        std::size_t global_epoch);

// Accuracy of head(fe(x)) (fe may be null).
double ClassifierAccuracy(const MlpSpec* fe_spec, const ParamSet* fe,
                          const MlpSpec& head_spec, const ParamSet& head,
                          const Tensor2& inputs, std::span<const int> labels);

struct FedSchedule {
  std::size_t rounds = 30;
  std::size_t local_epochs = 2;
  SgdOptions sgd;
  std::size_t bytes_per_scalar = 4;
};

struct Stage1Result {
  ParamSet fe;
  std::vector<ParamSet> heads;  // FedCE only; one per client
  std::vector<FedRoundReport> reports;
};

// ---- Stage 1: FedCE ----

// Every client trains fe + its own head on CE; fe is averaged with weights
// |D_i| after each round, heads stay local. fe starts from one shared init,
// head i from its own.
Stage1Result Stage1FedCe(std::span<const Dataset> clients,
                         const MlpSpec& fe_spec, const MlpSpec& head_spec,
                         const FedSchedule& schedule, std::uint64_t seed);

// Plain SGD of fe + head on one dataset for rounds * local_epochs epochs,
// with the same initialization and shuffle keys as client `client` of
// Stage1FedCe.
Stage1Result CentralizedCe(const Dataset& data, const MlpSpec& fe_spec,
                           const MlpSpec& head_spec,
                           const FedSchedule& schedule, std::uint64_t seed,
                           Phase phase = Phase::kStage1,
                           std::size_t client = 0);

// ---- Stage 1: FedSC ----

struct SpectralLoss {
  double loss = 0.0;
  Tensor2 grad_z1;
  Tensor2 grad_z2;
};

// -Tr(R+) + (q/2) ||R||_F^2 + (1 - q) Tr(R * rbar) with the minibatch
// estimates R+ = mean_s z1_s z2_s^T and R = mean over both views of z z^T.
// rbar is a constant. Throws kConfig on shape mismatch.
SpectralLoss SpectralContrastiveLocalLoss(const Tensor2& z1, const Tensor2& z2,
                                          const Tensor2& rbar, double q);

// mean_s z_s z_s^T over rows of z; exactly symmetric.
Tensor2 CorrelationMatrix(const Tensor2& z);

// rbar_{-i} = 1 / (1 - q_i) * sum_{j != i} q_j R_j. Zero when there is only
// one client. Throws kInternal if q_i = 1 with other clients present.
Tensor2 AggregateOthers(std::span<const Tensor2> shares,
                        std::span<const double> q, std::size_t i);

struct FedScOptions {
  AugmentSpec augment;
  double dp_noise_std = 0.05;
};

struct CorrelationShare {
  std::size_t client_id = 0;
  Tensor2 clean;   // before DP noise
  Tensor2 shared;  // what leaves the client
  double q = 0.0;
};

// Full-shard correlation of one augmented view per sample under fe, then
// elementwise N(0, dp_noise_std^2) noise. Asserts the clean matrix is
// symmetric to 1e-9.
CorrelationShare ShareCorrelation(const MlpSpec& fe_spec, const ParamSet& fe,
                                  const Dataset& shard, std::size_t client,
                                  double q, const FedScOptions& options,
                                  std::uint64_t seed, std::size_t round);

// One epoch of the local spectral objective on augmented minibatch pairs.
double SpectralEpoch(const MlpSpec& fe_spec, ParamSet& fe,
                     const Tensor2& inputs, const Tensor2& rbar, double q,
                     const FedScOptions& options, const SgdOptions& sgd,
                     std::uint64_t seed, Phase phase, std::size_t client,
                     std::size_t global_epoch);

Stage1Result Stage1FedSc(std::span<const Dataset> clients,
                         const MlpSpec& fe_spec, const FedSchedule& schedule,
                         const FedScOptions& options, std::uint64_t seed);

// Spectral SGD on one dataset with q = 1 and no shared statistics, keyed like
// client 0 of Stage1FedSc.
Stage1Result CentralizedSc(const Dataset& data, const MlpSpec& fe_spec,
                           const FedSchedule& schedule,
                           const FedScOptions& options, std::uint64_t seed);

// ---- Stage 2 ----

struct Stage2Options {
  std::size_t epochs = 30;
  SgdOptions sgd;
};

struct Stage2Result {
  std::vector<ParamSet> experts;
  std::vector<double> final_losses;
  std::uint64_t bytes = 0;  // always 0: training is local
};

// Expert i trains on shard i's frozen latents only. Warm starts from
// `init[i]` when given, otherwise from a fresh per-client init. Throws
// kInternal if fe changes.
Stage2Result Stage2Experts(std::span<const Dataset> clients,
                           const MlpSpec& fe_spec, const ParamSet& fe,
                           const MlpSpec& expert_spec,
                           const Stage2Options& options, std::uint64_t seed,
                           std::span<const ParamSet> init = {});

// ---- Stage 3 ----

// Uniform routing distribution over m experts.
RandomGate Stage3RanGate(std::size_t num_experts);

struct RollGateOptions {
  double p = 0.7;
  std::size_t epochs_per_client = 1;
  std::size_t max_passes = 20;
  double tolerance = 1e-4;
  SgdOptions sgd;
  std::size_t bytes_per_scalar = 4;
};

// Pseudo-label counts for a client with n samples: p*n own id, the rest
// spread evenly over the other ids, by largest remainder.
std::vector<std::size_t> PseudoLabelCounts(std::size_t n, std::size_t own,
                                           std::size_t num_clients, double p);

struct GateTrainResult {
  LinearGate gate;
  std::vector<FedRoundReport> reports;
  std::vector<double> round_losses;  // mean participant loss per round/pass
};

GateTrainResult Stage3RollGate(std::span<const Dataset> clients,
                               const MlpSpec& fe_spec, const ParamSet& fe,
                               const LinearGate& init,
                               const RollGateOptions& options,
                               std::uint64_t seed);

struct FedGateOptions {
  std::size_t rounds = 20;
  std::size_t local_epochs = 2;
  SgdOptions sgd{.lr = 0.05, .batch_size = 64, .max_grad_norm = 1.0};
  double lambda_load = 0.01;
  // Load-balance multiplier; nullopt means the expert count.
  std::optional<double> load_multiplier;
  double client_fraction = 0.7;
  std::size_t k = 1;
  GateWeighting weighting = GateWeighting::kProbability;
  std::size_t bytes_per_scalar = 4;
};

// ceil(fraction * m) distinct clients, ascending.
std::vector<std::size_t> SampleClients(std::size_t num_clients,
                                       double fraction, std::uint64_t seed,
                                       std::size_t round);

// One epoch of gate training through the MoE: CE(logits) + lambda * load
// balance, with fe and experts frozen. `latents` are fe outputs.
double GateEpoch(const NmoeModel& model, LinearGate& gate,
                 const Tensor2& latents, std::span<const int> labels,
                 const FedGateOptions& options, std::uint64_t seed,
                 Phase phase, std::size_t client, std::size_t global_epoch);

// `model` supplies the frozen fe and experts; its gate must be a LinearGate
// and is the initialization.
GateTrainResult Stage3FedGate(std::span<const Dataset> clients,
                              const NmoeModel& model,
                              const FedGateOptions& options,
                              std::uint64_t seed);

// Gate training on one dataset for rounds * local_epochs epochs, keyed like
// client 0 of Stage3FedGate.
GateTrainResult CentralizedGate(const Dataset& data, const NmoeModel& model,
                                const FedGateOptions& options,
                                std::uint64_t seed);

}  // namespace nmoe

#endif  // NMOE_FED_TRAIN_H_
