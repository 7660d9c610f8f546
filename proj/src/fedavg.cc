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

#include "nmoe/error.h"
#include "nmoe/fed_train.h"
#include "nmoe/ops.h"
#include "nmoe/rng.h"

namespace nmoe {

std::uint64_t TotalBytes(std::span<const FedRoundReport> reports) {
  std::uint64_t total = 0;
  for (const auto& r : reports) total += r.bytes;
  return total;
}

ParamSet FedAvg(std::span<const ParamSet> sets,
                std::span<const double> weights) {
  Require(!sets.empty(), ErrorCode::kConfig, "fedavg of zero parameter sets");
  Require(sets.size() == weights.size(), ErrorCode::kConfig,
          "fedavg needs one weight per parameter set");
  double total = 0.0;
  for (double w : weights) {
    Require(w >= 0.0 && std::isfinite(w), ErrorCode::kConfig,
            "fedavg weights must be finite and >= 0");
    total += w;
  }
  Require(total > 0.0, ErrorCode::kConfig, "fedavg weights sum to zero");
  for (std::size_t i = 1; i < sets.size(); ++i) {
    sets[0].RequireCompatible(sets[i], "fedavg client " + std::to_string(i));
  }
  ParamSet out = sets[0].Scaled(weights[0] / total);
  for (std::size_t i = 1; i < sets.size(); ++i) {
    out.AddScaled(sets[i], weights[i] / total);
  }
  return out;
}

std::uint64_t EpochSeed(std::uint64_t seed, Phase phase, std::size_t client,
                        std::size_t global_epoch) {
  return DeriveSeed(seed, Stream::kShuffle,
                    {static_cast<std::uint64_t>(phase), client, global_epoch});
}

double ClassifierEpoch(const MlpSpec* fe_spec, ParamSet* fe,
                       const MlpSpec& head_spec, ParamSet& head,
                       const Tensor2& inputs, std::span<const int> labels,
                       const SgdOptions& options, std::uint64_t shuffle_seed) {
  const std::size_t n = inputs.rows();
  Require(n > 0 && n == labels.size(), ErrorCode::kData,
          "training set is empty or has mismatched labels");
  Require(options.batch_size > 0, ErrorCode::kConfig, "batch size must be > 0");
  Require((fe_spec == nullptr) == (fe == nullptr), ErrorCode::kInternal,
          "extractor spec and params must be given together");
  Engine engine(shuffle_seed);
  const std::vector<std::size_t> order = Permutation(n, engine);
  double total = 0.0;
  std::vector<int> batch_labels;
  for (std::size_t start = 0; start < n; start += options.batch_size) {
    const std::size_t end = std::min(n, start + options.batch_size);
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    batch_labels.clear();
    for (std::size_t i : idx) batch_labels.push_back(labels[i]);
    const Tensor2 x = SelectRows(inputs, idx);

    std::optional<MlpForwardResult> fe_fwd;
    if (fe) fe_fwd = MlpForward(*fe_spec, *fe, x);
    const auto head_fwd =
        MlpForward(head_spec, head, fe_fwd ? fe_fwd->output : x);
    const auto ce = CrossEntropy(head_fwd.output, batch_labels);
    if (!std::isfinite(ce.loss)) {
      Fail(ErrorCode::kTraining, "non-finite loss");
    }
    auto head_grad = MlpBackward(head_fwd.tape, ce.grad);
    ParamSet fe_grad;
    if (fe) fe_grad = MlpBackward(fe_fwd->tape, head_grad.input).params;
    if (options.max_grad_norm) {
      const double a = GlobalNorm(head_grad.params);
      const double b = fe ? GlobalNorm(fe_grad) : 0.0;
      const double norm = std::sqrt(a * a + b * b);
      if (norm > *options.max_grad_norm) {
        const double scale = *options.max_grad_norm / norm;
        head_grad.params = head_grad.params.Scaled(scale);
        if (fe) fe_grad = fe_grad.Scaled(scale);
      }
    }
    head = SgdStep(head, head_grad.params, options.lr, options.weight_decay);
    if (fe) *fe = SgdStep(*fe, fe_grad, options.lr, options.weight_decay);
    total += ce.loss * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(n);
}

double ClassifierAccuracy(const MlpSpec* fe_spec, const ParamSet* fe,
                          const MlpSpec& head_spec, const ParamSet& head,
                          const Tensor2& inputs, std::span<const int> labels) {
  Require(inputs.rows() == labels.size() && !labels.empty(), ErrorCode::kData,
          "accuracy needs matching nonempty inputs and labels");
  const Tensor2 h = fe ? MlpApply(*fe_spec, *fe, inputs) : inputs;
  const Tensor2 out = MlpApply(head_spec, head, h);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const auto row = out.row(r);
    const int pred =
        static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += pred == labels[r];
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace nmoe
