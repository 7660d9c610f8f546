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

#ifndef NMOE_MLP_H_
#define NMOE_MLP_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nmoe/param_set.h"
#include "nmoe/tensor.h"

namespace nmoe {

enum class Activation { kIdentity, kRelu, kTanh };

std::string_view ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

// Fully connected network. widths = {input, hidden..., output}; layer l maps
// widths[l] -> widths[l + 1] and applies activations[l].
struct MlpSpec {
  std::vector<std::size_t> widths;
  std::vector<Activation> activations;

  // Hidden layers use `hidden`, the output layer is the identity.
  static MlpSpec Make(std::vector<std::size_t> widths,
                      Activation hidden = Activation::kRelu);

  std::size_t num_layers() const { return activations.size(); }
  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }

  // Throws kConfig unless there is at least one layer, every width is
  // positive and there is one activation per layer.
  void Validate() const;

  bool operator==(const MlpSpec&) const = default;
};

// Parameter names are "layer<l>.weight" (in x out) and "layer<l>.bias"
// (1 x out). Weights are Glorot-uniform, biases zero.
ParamSet InitMlp(const MlpSpec& spec, std::uint64_t seed);

// Throws kConfig if params do not match the spec's layer shapes.
void CheckMlpParams(const MlpSpec& spec, const ParamSet& params);

// Activation record of one forward pass. Holds its own copy of the weights so
// backward is self-contained.
struct MlpTape {
  MlpSpec spec;
  ParamSet params;
  std::vector<Tensor2> inputs;  // input to each layer
  std::vector<Tensor2> pre;     // pre-activation of each layer
  Tensor2 output;
};

struct MlpForwardResult {
  Tensor2 output;
  MlpTape tape;
};

struct MlpGrads {
  ParamSet params;
  Tensor2 input;
};

MlpForwardResult MlpForward(const MlpSpec& spec, const ParamSet& params,
                            const Tensor2& batch);

// Forward without building a tape.
Tensor2 MlpApply(const MlpSpec& spec, const ParamSet& params,
                 const Tensor2& batch);

// upstream must have the tape's output shape; throws kInternal otherwise.
MlpGrads MlpBackward(const MlpTape& tape, const Tensor2& upstream);

}  // namespace nmoe

#endif  // NMOE_MLP_H_
