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

#ifndef NMOE_MOE_H_
#define NMOE_MOE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nmoe/mlp.h"
#include "nmoe/param_set.h"
#include "nmoe/tensor.h"

namespace nmoe {

// Linear gate: logits = h * W + b (+ N(0, noise_std^2) while training).
// Parameters are "gate.weight" (latent x experts) and "gate.bias" (1 x experts).
struct LinearGate {
  ParamSet params;
  double noise_std = 0.01;

  static LinearGate Init(std::size_t latent_dim, std::size_t num_experts,
                         std::uint64_t seed, double noise_std = 0.01);

  const Tensor2& weight() const { return params.Get("gate.weight"); }
  const Tensor2& bias() const { return params.Get("gate.bias"); }
  std::size_t latent_dim() const { return weight().rows(); }
  std::size_t num_experts() const { return weight().cols(); }
  void Validate() const;
};

// Ignores latents and samples experts from a fixed distribution.
struct RandomGate {
  std::vector<double> distribution;

  static RandomGate Uniform(std::size_t num_experts);
  // Throws kConfig unless the distribution sums to 1 and has at least k
  // nonzero entries.
  void Validate(std::size_t k) const;
};

using GateModel = std::variant<LinearGate, RandomGate>;

// Per-row expert choices. Indices within a row are ordered by decreasing gate
// logit (lowest expert index first on ties).
struct GateDecision {
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // rows * k
  std::vector<double> weights;       // rows * k

  std::size_t rows() const { return k == 0 ? 0 : indices.size() / k; }
  std::span<const std::size_t> Indices(std::size_t row) const {
    return {indices.data() + row * k, k};
  }
  std::span<const double> Weights(std::size_t row) const {
    return {weights.data() + row * k, k};
  }
};

struct GateOutput {
  GateDecision decision;
  Tensor2 logits;  // perturbed gate logits (linear gate only)
  Tensor2 probs;   // unmasked softmax of `logits`, or the random distribution
};

// Positions of the k largest entries, ties broken by lowest index.
std::vector<std::size_t> TopKIndices(std::span<const double> row,
                                     std::size_t k);

// Noisy top-k gating. Entries outside the top k are masked to -inf and the
// masked row is softmaxed into the decision weights. `noise_seed` = nullopt
// disables the perturbation.
GateOutput GateTopK(const Tensor2& latents, const LinearGate& gate,
                    std::size_t k, std::optional<std::uint64_t> noise_seed);

// k distinct experts per row drawn without replacement; weights 1/k.
GateOutput RouteRandom(std::size_t rows, const RandomGate& gate, std::size_t k,
                       std::uint64_t seed);

struct LoadBalanceResult {
  double loss = 0.0;
  Tensor2 grad;                     // d loss / d probs
  std::vector<double> fractions;    // f_i: share of rows whose argmax is i
  std::vector<double> mean_probs;   // P_i
};

// multiplier * sum_i f_i P_i with f_i held constant. The multiplier defaults
// to the expert count so perfectly balanced routing scores exactly 1.
LoadBalanceResult LoadBalanceLoss(const Tensor2& probs,
                                  std::optional<double> multiplier = {});

struct NmoeModel {
  MlpSpec fe_spec;
  ParamSet fe;
  GateModel gate;
  MlpSpec expert_spec;
  std::vector<ParamSet> experts;

  std::size_t num_experts() const { return experts.size(); }
  std::size_t latent_dim() const { return fe_spec.output_width(); }
  std::size_t num_classes() const { return expert_spec.output_width(); }
  // Throws kConfig on any inconsistency between the pieces.
  void Validate() const;
};

enum class Mode { kTrain, kEval };

// How selected experts are weighted while training. kRenormalized is the
// softmax over the surviving top-k logits (the decision weights). With k = 1
// it is constant 1 and carries no gradient to the gate, so training paths
// default to kProbability: the unmasked softmax probability of each selected
// expert. Eval always uses kRenormalized; both give the same argmax.
enum class GateWeighting { kRenormalized, kProbability };

struct MoeOptions {
  std::size_t k = 1;
  Mode mode = Mode::kEval;
  std::uint64_t seed = 0;  // gate noise (train) or random routing
  GateWeighting weighting = GateWeighting::kRenormalized;
};

struct MoeOutput {
  Tensor2 logits;
  Tensor2 latents;
  GateOutput gate;
  std::vector<double> mix_weights;  // rows * k, weights actually applied
  // Train mode only.
  std::optional<MlpTape> fe_tape;
  std::vector<std::vector<std::size_t>> expert_rows;
  std::vector<MlpTape> expert_tapes;
  std::vector<Tensor2> expert_outputs;
};

MoeOutput MoeForward(const NmoeModel& model, const Tensor2& batch,
                     const MoeOptions& options);
// Same as MoeForward with h_F already computed (frozen extractor).
MoeOutput MoeForwardLatents(const NmoeModel& model, const Tensor2& latents,
                            const MoeOptions& options);

struct MoeGrads {
  ParamSet fe;
  ParamSet gate;
  std::vector<ParamSet> experts;
};

struct MoeBackwardOptions {
  bool fe = true;
  bool experts = true;
};

// Gradients of a scalar loss given d loss / d logits and, optionally, an
// extra d loss / d probs (the load-balance term). Requires a train-mode
// forward. Gate grads are empty for a random gate.
MoeGrads MoeBackward(const NmoeModel& model, const MoeOutput& out,
                     const MoeOptions& options, const Tensor2& grad_logits,
                     const Tensor2* grad_probs,
                     const MoeBackwardOptions& what = {});

// Checkpoint container: magic "NMOECKPT", u32 version, u64 header length,
// JSON header (specs, gate, tensor table, config hash), raw f64 tensors.
void SaveCheckpoint(const NmoeModel& model, const std::string& config_hash,
                    const std::filesystem::path& path);
struct LoadedCheckpoint {
  NmoeModel model;
  std::string config_hash;
};
LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace nmoe

#endif  // NMOE_MOE_H_
