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

#include "nmoe/error.h"
#include "nmoe/fed_train.h"
#include "nmoe/rng.h"
#include "train_context.h"

namespace nmoe {

Stage2Result Stage2Experts(std::span<const Dataset> clients,
                           const MlpSpec& fe_spec, const ParamSet& fe,
                           const MlpSpec& expert_spec,
                           const Stage2Options& options, std::uint64_t seed,
                           std::span<const ParamSet> init) {
  Require(!clients.empty(), ErrorCode::kConfig, "need at least one client");
  Require(init.empty() || init.size() == clients.size(), ErrorCode::kConfig,
          "warm start needs one expert per client");
  Require(expert_spec.input_width() == fe_spec.output_width(),
          ErrorCode::kConfig, "expert input width must equal latent dim");
  const std::uint64_t fe_hash = fe.Hash();
  Stage2Result result;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const Tensor2 latents = MlpApply(fe_spec, fe, clients[i].features);
    ParamSet expert =
        init.empty()
            ? InitMlp(expert_spec, DeriveSeed(seed, Stream::kExpertInit, {i}))
            : init[i];
    CheckMlpParams(expert_spec, expert);
    double loss = 0.0;
    for (std::size_t e = 0; e < options.epochs; ++e) {
      loss = internal::InContext("stage2 expert", i, e, [&] {
        return ClassifierEpoch(nullptr, nullptr, expert_spec, expert, latents,
                               clients[i].labels, options.sgd,
                               EpochSeed(seed, Phase::kStage2, i, e));
      });
    }
    result.experts.push_back(std::move(expert));
    result.final_losses.push_back(loss);
  }
  Require(fe.Hash() == fe_hash, ErrorCode::kInternal,
          "feature extractor changed during expert training");
  return result;
}

}  // namespace nmoe
