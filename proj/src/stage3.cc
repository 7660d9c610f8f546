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
#include <string>
#include <vector>

#include "nmoe/error.h"
#include "nmoe/fed_train.h"
#include "nmoe/ops.h"
#include "nmoe/rng.h"
#include "train_context.h"

namespace nmoe {
namespace {

// The gate as a one-layer identity-activation MLP, so RollGate can reuse the
// classifier trainer.
MlpSpec GateAsMlp(const LinearGate& gate) {
  return MlpSpec::Make({gate.latent_dim(), gate.num_experts()});
}

ParamSet ToMlpParams(const LinearGate& gate) {
  ParamSet p;
  p.Add("layer0.weight", gate.weight());
  p.Add("layer0.bias", gate.bias());
  return p;
}

void FromMlpParams(const ParamSet& p, LinearGate& gate) {
  gate.params.Get("gate.weight") = p.Get("layer0.weight");
  gate.params.Get("gate.bias") = p.Get("layer0.bias");
}

std::vector<Tensor2> ClientLatents(std::span<const Dataset> clients,
                                   const MlpSpec& fe_spec, const ParamSet& fe) {
  std::vector<Tensor2> out;
  for (const auto& c : clients) out.push_back(MlpApply(fe_spec, fe, c.features));
  return out;
}

void RequireClients(std::span<const Dataset> clients) {
  Require(!clients.empty(), ErrorCode::kConfig, "need at least one client");
  for (std::size_t i = 0; i < clients.size(); ++i) {
    Require(clients[i].size() > 0, ErrorCode::kData,
            "client " + std::to_string(i) + " has an empty training shard");
  }
}

std::uint64_t Hash(const NmoeModel& model) {
  std::uint64_t h = model.fe.Hash();
  for (const auto& e : model.experts) h = h * 1099511628211ULL ^ e.Hash();
  return h;
}

}  // namespace

RandomGate Stage3RanGate(std::size_t num_experts) {
  return RandomGate::Uniform(num_experts);
}

std::vector<std::size_t> PseudoLabelCounts(std::size_t n, std::size_t own,
                                           std::size_t num_clients, double p) {
  Require(p > 0.0 && p < 1.0, ErrorCode::kConfig,
          "RollGate p must lie in (0, 1)");
  Require(num_clients >= 2 && own < num_clients, ErrorCode::kConfig,
          "RollGate needs at least two clients");
  return ClassCounts(n, static_cast<int>(own), p,
                     static_cast<int>(num_clients));
}

GateTrainResult Stage3RollGate(std::span<const Dataset> clients,
                               const MlpSpec& fe_spec, const ParamSet& fe,
                               const LinearGate& init,
                               const RollGateOptions& options,
                               std::uint64_t seed) {
  RequireClients(clients);
  const std::size_t m = clients.size();
  Require(init.num_experts() == m, ErrorCode::kConfig,
          "gate width must equal the client count");
  Require(options.max_passes > 0 && options.epochs_per_client > 0,
          ErrorCode::kConfig, "RollGate passes and epochs must be positive");
  const std::uint64_t fe_hash = fe.Hash();
  const std::vector<Tensor2> latents = ClientLatents(clients, fe_spec, fe);

  std::vector<std::vector<int>> pseudo(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t n = clients[i].size();
    const auto counts = PseudoLabelCounts(n, i, m, options.p);
    Engine engine = MakeEngine(seed, Stream::kPseudoLabel, {i});
    const auto order = Permutation(n, engine);
    pseudo[i].assign(n, 0);
    std::size_t pos = 0;
    for (std::size_t id = 0; id < m; ++id) {
      for (std::size_t c = 0; c < counts[id]; ++c) {
        pseudo[i][order[pos++]] = static_cast<int>(id);
      }
    }
  }

  GateTrainResult result;
  result.gate = init;
  const MlpSpec spec = GateAsMlp(init);
  ParamSet params = ToMlpParams(init);
  const std::uint64_t hop_bytes =
      params.NumScalars() * options.bytes_per_scalar;
  double previous = NAN;
  for (std::size_t pass = 0; pass < options.max_passes; ++pass) {
    internal::Stopwatch clock;
    FedRoundReport report;
    report.stage = "stage3_rollgate";
    report.round = pass;
    double pass_loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double loss = 0.0;
      for (std::size_t e = 0; e < options.epochs_per_client; ++e) {
        loss = internal::InContext("stage3 rollgate", i, pass, [&] {
          return ClassifierEpoch(
              nullptr, nullptr, spec, params, latents[i], pseudo[i],
              options.sgd,
              EpochSeed(seed, Phase::kStage3, i,
                        pass * options.epochs_per_client + e));
        });
      }
      report.participants.push_back(i);
      report.client_losses.push_back(loss);
      pass_loss += loss / static_cast<double>(m);
    }
    FromMlpParams(params, result.gate);
    report.params_hash = HashHex(result.gate.params.Hash());
    report.bytes = m * hop_bytes;
    report.wall_seconds = clock.Seconds();
    result.reports.push_back(std::move(report));
    result.round_losses.push_back(pass_loss);
    if (pass > 0 && std::abs(pass_loss - previous) < options.tolerance) break;
    previous = pass_loss;
  }
  Require(fe.Hash() == fe_hash, ErrorCode::kInternal,
          "feature extractor changed during RollGate");
  return result;
}

std::vector<std::size_t> SampleClients(std::size_t num_clients,
                                       double fraction, std::uint64_t seed,
                                       std::size_t round) {
  Require(fraction > 0.0 && fraction <= 1.0, ErrorCode::kConfig,
          "client fraction must lie in (0, 1]");
  Require(num_clients > 0, ErrorCode::kConfig, "need at least one client");
  // The epsilon keeps 0.7 * 10 from rounding up to 8.
  auto count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(num_clients) - 1e-9));
  count = std::clamp<std::size_t>(count, 1, num_clients);
  Engine engine = MakeEngine(seed, Stream::kClientSampling, {round});
  std::vector<std::size_t> ids = Permutation(num_clients, engine);
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

double GateEpoch(const NmoeModel& model, LinearGate& gate,
                 const Tensor2& latents, std::span<const int> labels,
                 const FedGateOptions& options, std::uint64_t seed,
                 Phase phase, std::size_t client, std::size_t global_epoch) {
  const std::size_t n = latents.rows();
  Require(n > 0 && n == labels.size(), ErrorCode::kData,
          "gate training set is empty or has mismatched labels");
  Require(options.sgd.batch_size > 0, ErrorCode::kConfig,
          "batch size must be > 0");
  NmoeModel local = model;
  local.gate = gate;
  Engine engine(EpochSeed(seed, phase, client, global_epoch));
  const std::vector<std::size_t> order = Permutation(n, engine);
  double total = 0.0;
  std::vector<int> batch_labels;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < n;
       start += options.sgd.batch_size, ++batch_index) {
    const std::size_t end = std::min(n, start + options.sgd.batch_size);
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    batch_labels.clear();
    for (std::size_t i : idx) batch_labels.push_back(labels[i]);
    const MoeOptions moe{
        .k = options.k,
        .mode = Mode::kTrain,
        .seed = DeriveSeed(seed, Stream::kGateNoise,
                           {static_cast<std::uint64_t>(phase), client,
                            global_epoch, batch_index}),
        .weighting = options.weighting};
    const MoeOutput out =
        MoeForwardLatents(local, SelectRows(latents, idx), moe);
    const auto ce = CrossEntropy(out.logits, batch_labels);
    double loss = ce.loss;
    Tensor2 grad_probs;
    if (options.lambda_load > 0.0) {
      auto lb = LoadBalanceLoss(out.gate.probs, options.load_multiplier);
      loss += options.lambda_load * lb.loss;
      grad_probs = std::move(lb.grad);
      for (double& v : grad_probs.data()) v *= options.lambda_load;
    }
    if (!std::isfinite(loss)) Fail(ErrorCode::kTraining, "non-finite loss");
    MoeGrads grads =
        MoeBackward(local, out, moe, ce.grad,
                    options.lambda_load > 0.0 ? &grad_probs : nullptr,
                    {.fe = false, .experts = false});
    if (options.sgd.max_grad_norm) {
      grads.gate = GradNormalize(grads.gate, *options.sgd.max_grad_norm);
    }
    gate.params = SgdStep(gate.params, grads.gate, options.sgd.lr,
                          options.sgd.weight_decay);
    std::get<LinearGate>(local.gate).params = gate.params;
    total += loss * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(n);
}

GateTrainResult Stage3FedGate(std::span<const Dataset> clients,
                              const NmoeModel& model,
                              const FedGateOptions& options,
                              std::uint64_t seed) {
  RequireClients(clients);
  model.Validate();
  const std::size_t m = clients.size();
  Require(model.num_experts() == m, ErrorCode::kConfig,
          "expert count must equal the client count");
  Require(options.k >= 1 && options.k <= m, ErrorCode::kConfig,
          "top-k must satisfy 1 <= k <= " + std::to_string(m));
  Require(options.rounds > 0 && options.local_epochs > 0, ErrorCode::kConfig,
          "FedGate rounds and local epochs must be positive");
  const auto* init = std::get_if<LinearGate>(&model.gate);
  Require(init != nullptr, ErrorCode::kConfig,
          "FedGate needs a linear gate to start from");
  const std::uint64_t frozen = Hash(model);
  const std::vector<Tensor2> latents =
      ClientLatents(clients, model.fe_spec, model.fe);

  GateTrainResult result;
  result.gate = *init;
  const std::uint64_t gate_bytes =
      result.gate.params.NumScalars() * options.bytes_per_scalar;
  std::uint64_t expert_bytes = 0;
  for (const auto& e : model.experts) {
    expert_bytes += e.NumScalars() * options.bytes_per_scalar;
  }
  for (std::size_t r = 0; r < options.rounds; ++r) {
    internal::Stopwatch clock;
    FedRoundReport report;
    report.stage = "stage3_fedgate";
    report.round = r;
    report.participants = SampleClients(m, options.client_fraction, seed, r);
    std::vector<ParamSet> locals;
    std::vector<double> weights;
    double mean_loss = 0.0;
    for (std::size_t i : report.participants) {
      LinearGate gate = result.gate;
      double loss = 0.0;
      for (std::size_t e = 0; e < options.local_epochs; ++e) {
        loss = internal::InContext("stage3 fedgate", i, r, [&] {
          return GateEpoch(model, gate, latents[i], clients[i].labels, options,
                           seed, Phase::kStage3, i,
                           r * options.local_epochs + e);
        });
      }
      report.client_losses.push_back(loss);
      mean_loss += loss / static_cast<double>(report.participants.size());
      locals.push_back(std::move(gate.params));
      weights.push_back(static_cast<double>(clients[i].size()));
    }
    result.gate.params = FedAvg(locals, weights);
    report.params_hash = HashHex(result.gate.params.Hash());
    report.bytes = report.participants.size() * 2 * gate_bytes +
                   (r == 0 ? expert_bytes : 0);
    report.wall_seconds = clock.Seconds();
    result.reports.push_back(std::move(report));
    result.round_losses.push_back(mean_loss);
  }
  Require(Hash(model) == frozen, ErrorCode::kInternal,
          "frozen extractor or experts changed during FedGate");
  return result;
}

GateTrainResult CentralizedGate(const Dataset& data, const NmoeModel& model,
                                const FedGateOptions& options,
                                std::uint64_t seed) {
  Require(data.size() > 0, ErrorCode::kData, "empty training set");
  model.Validate();
  const auto* init = std::get_if<LinearGate>(&model.gate);
  Require(init != nullptr, ErrorCode::kConfig,
          "gate training needs a linear gate to start from");
  const Tensor2 latents = MlpApply(model.fe_spec, model.fe, data.features);
  GateTrainResult result;
  result.gate = *init;
  const std::size_t epochs = options.rounds * options.local_epochs;
  for (std::size_t e = 0; e < epochs; ++e) {
    internal::Stopwatch clock;
    const double loss = internal::InContext(
        "centralized gate", 0, e / options.local_epochs, [&] {
          return GateEpoch(model, result.gate, latents, data.labels, options,
                           seed, Phase::kStage3, 0, e);
        });
    if ((e + 1) % options.local_epochs == 0) {
      FedRoundReport report;
      report.stage = "centralized_gate";
      report.round = e / options.local_epochs;
      report.participants = {0};
      report.client_losses = {loss};
      report.params_hash = HashHex(result.gate.params.Hash());
      report.wall_seconds = clock.Seconds();
      result.reports.push_back(std::move(report));
      result.round_losses.push_back(loss);
    }
  }
  return result;
}

}  // namespace nmoe
