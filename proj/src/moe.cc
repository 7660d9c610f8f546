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

#include "nmoe/moe.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <utility>

#include "nmoe/error.h"
#include "nmoe/ops.h"
#include "nmoe/rng.h"

namespace nmoe {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void RequireK(std::size_t k, std::size_t m) {
  Require(k >= 1 && k <= m, ErrorCode::kConfig,
          "top-k must satisfy 1 <= k <= " + std::to_string(m) + ", got " +
              std::to_string(k));
}

}  // namespace

LinearGate LinearGate::Init(std::size_t latent_dim, std::size_t num_experts,
                            std::uint64_t seed, double noise_std) {
  Require(latent_dim > 0 && num_experts > 0, ErrorCode::kConfig,
          "gate dimensions must be positive");
  Engine engine(seed);
  const double limit =
      std::sqrt(6.0 / static_cast<double>(latent_dim + num_experts));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor2 w(latent_dim, num_experts);
  for (double& v : w.data()) v = dist(engine);
  LinearGate gate;
  gate.params.Add("gate.weight", std::move(w));
  gate.params.Add("gate.bias", Tensor2(1, num_experts));
  gate.noise_std = noise_std;
  return gate;
}

void LinearGate::Validate() const {
  Require(params.size() == 2 && params.Contains("gate.weight") &&
              params.Contains("gate.bias"),
          ErrorCode::kConfig, "gate needs gate.weight and gate.bias");
  Require(bias().rows() == 1 && bias().cols() == weight().cols(),
          ErrorCode::kConfig, "gate bias shape does not match weight");
  Require(noise_std >= 0.0, ErrorCode::kConfig, "gate noise std must be >= 0");
}

RandomGate RandomGate::Uniform(std::size_t num_experts) {
  Require(num_experts > 0, ErrorCode::kConfig, "need at least one expert");
  return {std::vector<double>(num_experts,
                              1.0 / static_cast<double>(num_experts))};
}

void RandomGate::Validate(std::size_t k) const {
  double sum = 0.0;
  std::size_t nonzero = 0;
  for (double p : distribution) {
    Require(p >= 0.0 && std::isfinite(p), ErrorCode::kConfig,
            "routing distribution entries must be finite and >= 0");
    sum += p;
    nonzero += p > 0.0;
  }
  Require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::kConfig,
          "routing distribution must sum to 1");
  Require(nonzero >= k, ErrorCode::kConfig,
          "routing distribution has " + std::to_string(nonzero) +
              " nonzero entries, fewer than k = " + std::to_string(k));
}

std::vector<std::size_t> TopKIndices(std::span<const double> row,
                                     std::size_t k) {
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return row[a] > row[b];
  });
  order.resize(k);
  return order;
}

GateOutput GateTopK(const Tensor2& latents, const LinearGate& gate,
                    std::size_t k, std::optional<std::uint64_t> noise_seed) {
  gate.Validate();
  const std::size_t m = gate.num_experts();
  RequireK(k, m);
  Require(latents.cols() == gate.latent_dim(), ErrorCode::kConfig,
          "latent width " + std::to_string(latents.cols()) +
              " does not match gate input " +
              std::to_string(gate.latent_dim()));
  GateOutput out;
  out.logits = MatMul(latents, gate.weight());
  const auto bias = gate.bias().row(0);
  for (std::size_t r = 0; r < out.logits.rows(); ++r) {
    auto row = out.logits.row(r);
    for (std::size_t j = 0; j < m; ++j) row[j] += bias[j];
  }
  if (noise_seed && gate.noise_std > 0.0) {
    Engine engine(*noise_seed);
    std::normal_distribution<double> normal(0.0, gate.noise_std);
    for (double& v : out.logits.data()) v += normal(engine);
  }
  out.probs = Softmax(out.logits);

  Tensor2 masked(out.logits.rows(), m, kNegInf);
  out.decision.k = k;
  out.decision.indices.reserve(out.logits.rows() * k);
  for (std::size_t r = 0; r < out.logits.rows(); ++r) {
    for (std::size_t j : TopKIndices(out.logits.row(r), k)) {
      masked(r, j) = out.logits(r, j);
      out.decision.indices.push_back(j);
    }
  }
  const Tensor2 weights = Softmax(masked);
  out.decision.weights.reserve(out.decision.indices.size());
  for (std::size_t r = 0; r < out.logits.rows(); ++r) {
    for (std::size_t j : out.decision.Indices(r)) {
      out.decision.weights.push_back(weights(r, j));
    }
  }
  return out;
}

GateOutput RouteRandom(std::size_t rows, const RandomGate& gate, std::size_t k,
                       std::uint64_t seed) {
  const std::size_t m = gate.distribution.size();
  RequireK(k, m);
  gate.Validate(k);
  GateOutput out;
  out.probs = Tensor2(rows, m);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(gate.distribution.begin(), gate.distribution.end(),
              out.probs.row(r).begin());
  }
  out.decision.k = k;
  out.decision.indices.reserve(rows * k);
  out.decision.weights.assign(rows * k, 1.0 / static_cast<double>(k));
  Engine engine(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> remaining;
  for (std::size_t r = 0; r < rows; ++r) {
    remaining = gate.distribution;
    for (std::size_t s = 0; s < k; ++s) {
      double total = 0.0;
      for (double p : remaining) total += p;
      const double u = unit(engine) * total;
      double acc = 0.0;
      std::size_t pick = m;
      for (std::size_t j = 0; j < m; ++j) {
        if (remaining[j] <= 0.0) continue;
        acc += remaining[j];
        pick = j;
        if (u < acc) break;
      }
      out.decision.indices.push_back(pick);
      remaining[pick] = 0.0;
    }
  }
  return out;
}

LoadBalanceResult LoadBalanceLoss(const Tensor2& probs,
                                  std::optional<double> multiplier) {
  const std::size_t n = probs.rows(), m = probs.cols();
  Require(n > 0 && m > 0, ErrorCode::kData, "load balance of empty batch");
  LoadBalanceResult out;
  out.fractions.assign(m, 0.0);
  out.mean_probs.assign(m, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = probs.row(r);
    double sum = 0.0;
    std::size_t argmax = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!(row[j] >= 0.0 && std::isfinite(row[j]))) {
        Fail(ErrorCode::kData, "load balance input row " + std::to_string(r) +
                                   " is not a probability vector");
      }
      sum += row[j];
      if (row[j] > row[argmax]) argmax = j;
      out.mean_probs[j] += row[j];
    }
    if (!(std::abs(sum - 1.0) <= 1e-6)) {
      Fail(ErrorCode::kData, "load balance input row " + std::to_string(r) +
                                 " sums to " + std::to_string(sum));
    }
    out.fractions[argmax] += 1.0;
  }
  const double scale = multiplier.value_or(static_cast<double>(m));
  for (std::size_t j = 0; j < m; ++j) {
    out.fractions[j] /= static_cast<double>(n);
    out.mean_probs[j] /= static_cast<double>(n);
    out.loss += out.fractions[j] * out.mean_probs[j];
  }
  out.loss *= scale;
  out.grad = Tensor2(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    auto g = out.grad.row(r);
    for (std::size_t j = 0; j < m; ++j) {
      g[j] = scale * out.fractions[j] / static_cast<double>(n);
    }
  }
  return out;
}

void NmoeModel::Validate() const {
  CheckMlpParams(fe_spec, fe);
  Require(!experts.empty(), ErrorCode::kConfig, "model has no experts");
  Require(expert_spec.input_width() == fe_spec.output_width(),
          ErrorCode::kConfig,
          "expert input width must equal latent dimension");
  for (const auto& e : experts) CheckMlpParams(expert_spec, e);
  if (const auto* g = std::get_if<LinearGate>(&gate)) {
    g->Validate();
    Require(g->latent_dim() == latent_dim() &&
                g->num_experts() == num_experts(),
            ErrorCode::kConfig, "gate shape does not match model");
  } else {
    Require(std::get<RandomGate>(gate).distribution.size() == num_experts(),
            ErrorCode::kConfig, "routing distribution size != expert count");
  }
}

MoeOutput MoeForwardLatents(const NmoeModel& model, const Tensor2& latents,
                            const MoeOptions& options) {
  const std::size_t n = latents.rows(), m = model.num_experts();
  const std::size_t k = options.k;
  RequireK(k, m);
  const bool train = options.mode == Mode::kTrain;
  MoeOutput out;
  out.latents = latents;
  const auto* linear = std::get_if<LinearGate>(&model.gate);
  if (linear) {
    out.gate = GateTopK(latents, *linear, k,
                        train ? std::optional<std::uint64_t>(options.seed)
                              : std::nullopt);
  } else {
    out.gate = RouteRandom(n, std::get<RandomGate>(model.gate), k, options.seed);
  }
  const GateDecision& d = out.gate.decision;
  const bool by_prob =
      linear && train && options.weighting == GateWeighting::kProbability;
  out.mix_weights.resize(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t s = 0; s < k; ++s) {
      out.mix_weights[r * k + s] =
          by_prob ? out.gate.probs(r, d.indices[r * k + s])
                  : d.weights[r * k + s];
    }
  }

  out.expert_rows.assign(m, {});
  std::vector<std::size_t> position(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t s = 0; s < k; ++s) {
      auto& rows = out.expert_rows[d.indices[r * k + s]];
      position[r * k + s] = rows.size();
      rows.push_back(r);
    }
  }
  out.expert_outputs.resize(m);
  if (train) out.expert_tapes.resize(m);
  for (std::size_t e = 0; e < m; ++e) {
    if (out.expert_rows[e].empty()) continue;
    const Tensor2 sub = SelectRows(latents, out.expert_rows[e]);
    if (train) {
      auto fwd = MlpForward(model.expert_spec, model.experts[e], sub);
      out.expert_outputs[e] = std::move(fwd.output);
      out.expert_tapes[e] = std::move(fwd.tape);
    } else {
      out.expert_outputs[e] =
          MlpApply(model.expert_spec, model.experts[e], sub);
    }
  }
  out.logits = Tensor2(n, model.num_classes());
  for (std::size_t r = 0; r < n; ++r) {
    auto dst = out.logits.row(r);
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t e = d.indices[r * k + s];
      const double w = out.mix_weights[r * k + s];
      const auto src = out.expert_outputs[e].row(position[r * k + s]);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * src[c];
    }
  }
  if (!train) {
    out.expert_rows.clear();
    out.expert_outputs.clear();
  }
  return out;
}

MoeOutput MoeForward(const NmoeModel& model, const Tensor2& batch,
                     const MoeOptions& options) {
  model.Validate();
  if (options.mode == Mode::kTrain) {
    auto fe = MlpForward(model.fe_spec, model.fe, batch);
    MoeOutput out = MoeForwardLatents(model, fe.output, options);
    out.fe_tape = std::move(fe.tape);
    return out;
  }
  return MoeForwardLatents(model, MlpApply(model.fe_spec, model.fe, batch),
                           options);
}

MoeGrads MoeBackward(const NmoeModel& model, const MoeOutput& out,
                     const MoeOptions& options, const Tensor2& grad_logits,
                     const Tensor2* grad_probs,
                     const MoeBackwardOptions& what) {
  Require(!out.expert_tapes.empty(), ErrorCode::kInternal,
          "MoeBackward needs a train-mode forward");
  Require(grad_logits.SameShape(out.logits), ErrorCode::kInternal,
          "logit gradient shape mismatch");
  Require(!what.fe || out.fe_tape.has_value(), ErrorCode::kInternal,
          "extractor gradient requested without an extractor tape");
  const std::size_t n = out.logits.rows(), m = model.num_experts();
  const std::size_t k = options.k;
  const GateDecision& d = out.gate.decision;

  // Position of each (row, slot) within its expert's sub-batch, in the same
  // order the forward pass built them.
  std::vector<std::size_t> position(n * k);
  {
    std::vector<std::size_t> fill(m, 0);
    for (std::size_t i = 0; i < n * k; ++i) position[i] = fill[d.indices[i]]++;
  }

  std::vector<double> grad_mix(n * k, 0.0);
  std::vector<Tensor2> upstream(m);
  for (std::size_t e = 0; e < m; ++e) {
    if (!out.expert_rows[e].empty()) {
      upstream[e] = Tensor2(out.expert_rows[e].size(), model.num_classes());
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto g = grad_logits.row(r);
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t i = r * k + s;
      const std::size_t e = d.indices[i];
      const auto y = out.expert_outputs[e].row(position[i]);
      double dot = 0.0;
      for (std::size_t c = 0; c < g.size(); ++c) dot += g[c] * y[c];
      grad_mix[i] = dot;
      auto u = upstream[e].row(position[i]);
      for (std::size_t c = 0; c < g.size(); ++c) u[c] = out.mix_weights[i] * g[c];
    }
  }

  MoeGrads grads;
  Tensor2 grad_latents(n, model.latent_dim());
  if (what.experts || what.fe) {
    grads.experts.reserve(m);
    for (std::size_t e = 0; e < m; ++e) {
      if (out.expert_rows[e].empty()) {
        grads.experts.push_back(model.experts[e].ZerosLike());
        continue;
      }
      auto eg = MlpBackward(out.expert_tapes[e], upstream[e]);
      for (std::size_t p = 0; p < out.expert_rows[e].size(); ++p) {
        auto dst = grad_latents.row(out.expert_rows[e][p]);
        const auto src = eg.input.row(p);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
      grads.experts.push_back(std::move(eg.params));
    }
    if (!what.experts) grads.experts.clear();
  }

  if (const auto* gate = std::get_if<LinearGate>(&model.gate)) {
    Tensor2 grad_gate_logits;
    if (options.weighting == GateWeighting::kProbability) {
      Tensor2 grad_p(n, m);
      for (std::size_t i = 0; i < n * k; ++i) {
        grad_p(i / k, d.indices[i]) += grad_mix[i];
      }
      if (grad_probs) {
        for (std::size_t j = 0; j < grad_p.size(); ++j) {
          grad_p.data()[j] += grad_probs->data()[j];
        }
      }
      grad_gate_logits = SoftmaxBackward(out.gate.probs, grad_p);
    } else {
      Tensor2 w(n, m), gw(n, m);
      for (std::size_t i = 0; i < n * k; ++i) {
        w(i / k, d.indices[i]) = d.weights[i];
        gw(i / k, d.indices[i]) = grad_mix[i];
      }
      grad_gate_logits = SoftmaxBackward(w, gw);
      if (grad_probs) {
        const Tensor2 extra = SoftmaxBackward(out.gate.probs, *grad_probs);
        for (std::size_t j = 0; j < extra.size(); ++j) {
          grad_gate_logits.data()[j] += extra.data()[j];
        }
      }
    }
    Tensor2 grad_bias(1, m);
    for (std::size_t r = 0; r < n; ++r) {
      const auto g = grad_gate_logits.row(r);
      for (std::size_t j = 0; j < m; ++j) grad_bias(0, j) += g[j];
    }
    grads.gate.Add("gate.weight", MatMulTransA(out.latents, grad_gate_logits));
    grads.gate.Add("gate.bias", std::move(grad_bias));
    if (what.fe) {
      const Tensor2 via_gate = MatMulTransB(grad_gate_logits, gate->weight());
      for (std::size_t j = 0; j < via_gate.size(); ++j) {
        grad_latents.data()[j] += via_gate.data()[j];
      }
    }
  }

  if (what.fe) grads.fe = MlpBackward(*out.fe_tape, grad_latents).params;
  return grads;
}

}  // namespace nmoe
