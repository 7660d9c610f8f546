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

#include "nmoe/mlp.h"

#include <cmath>
#include <random>
#include <utility>

#include "nmoe/error.h"
#include "nmoe/rng.h"

namespace nmoe {
namespace {

std::string WeightName(std::size_t l) {
  return "layer" + std::to_string(l) + ".weight";
}
std::string BiasName(std::size_t l) {
  return "layer" + std::to_string(l) + ".bias";
}

void ApplyActivation(Activation a, Tensor2& t) {
  switch (a) {
    case Activation::kIdentity:
      return;
    case Activation::kRelu:
      for (double& v : t.data()) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::kTanh:
      for (double& v : t.data()) v = std::tanh(v);
      return;
  }
}

// Multiplies grad in place by the activation derivative at `pre`.
void ActivationBackward(Activation a, const Tensor2& pre, Tensor2& grad) {
  auto g = grad.data();
  const auto z = pre.data();
  switch (a) {
    case Activation::kIdentity:
      return;
    case Activation::kRelu:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(z[i] > 0.0)) g[i] = 0.0;
      }
      return;
    case Activation::kTanh:
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = std::tanh(z[i]);
        g[i] *= 1.0 - t * t;
      }
      return;
  }
}

Tensor2 Affine(const Tensor2& x, const Tensor2& w, const Tensor2& b) {
  Tensor2 y = MatMul(x, w);
  const auto bias = b.row(0);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
  return y;
}

}  // namespace

std::string_view ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  Fail(ErrorCode::kConfig, "unknown activation '" + std::string(name) + "'");
}

MlpSpec MlpSpec::Make(std::vector<std::size_t> widths, Activation hidden) {
  MlpSpec spec;
  const std::size_t layers = widths.empty() ? 0 : widths.size() - 1;
  spec.widths = std::move(widths);
  spec.activations.assign(layers, hidden);
  if (layers > 0) spec.activations.back() = Activation::kIdentity;
  spec.Validate();
  return spec;
}

void MlpSpec::Validate() const {
  Require(widths.size() >= 2, ErrorCode::kConfig,
          "MLP needs at least one layer");
  Require(activations.size() + 1 == widths.size(), ErrorCode::kConfig,
          "MLP needs one activation per layer");
  for (std::size_t w : widths) {
    Require(w > 0, ErrorCode::kConfig, "MLP widths must be positive");
  }
}

ParamSet InitMlp(const MlpSpec& spec, std::uint64_t seed) {
  spec.Validate();
  Engine engine(seed);
  ParamSet params;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor2 w(in, out);
    for (double& v : w.data()) v = dist(engine);
    params.Add(WeightName(l), std::move(w));
    params.Add(BiasName(l), Tensor2(1, out));
  }
  return params;
}

void CheckMlpParams(const MlpSpec& spec, const ParamSet& params) {
  spec.Validate();
  Require(params.size() == 2 * spec.num_layers(), ErrorCode::kConfig,
          "parameter count does not match MLP spec");
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto& e_w = params.entries()[2 * l];
    const auto& e_b = params.entries()[2 * l + 1];
    Require(e_w.name == WeightName(l) && e_b.name == BiasName(l),
            ErrorCode::kConfig, "unexpected parameter names for layer " +
                                    std::to_string(l));
    Require(e_w.tensor.rows() == spec.widths[l] &&
                e_w.tensor.cols() == spec.widths[l + 1],
            ErrorCode::kConfig,
            "layer " + std::to_string(l) + " weight shape " +
                e_w.tensor.ShapeString() + " does not match spec");
    Require(e_b.tensor.rows() == 1 && e_b.tensor.cols() == spec.widths[l + 1],
            ErrorCode::kConfig,
            "layer " + std::to_string(l) + " bias shape does not match spec");
  }
}

MlpForwardResult MlpForward(const MlpSpec& spec, const ParamSet& params,
                            const Tensor2& batch) {
  CheckMlpParams(spec, params);
  Require(batch.cols() == spec.input_width(), ErrorCode::kConfig,
          "batch width " + std::to_string(batch.cols()) +
              " does not match MLP input width " +
              std::to_string(spec.input_width()));
  MlpForwardResult result;
  result.tape.spec = spec;
  result.tape.params = params;
  Tensor2 x = batch;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto& w = params.entries()[2 * l].tensor;
    const auto& b = params.entries()[2 * l + 1].tensor;
    Tensor2 z = Affine(x, w, b);
    result.tape.inputs.push_back(std::move(x));
    x = z;
    ApplyActivation(spec.activations[l], x);
    result.tape.pre.push_back(std::move(z));
  }
  result.tape.output = x;
  result.output = std::move(x);
  return result;
}

Tensor2 MlpApply(const MlpSpec& spec, const ParamSet& params,
                 const Tensor2& batch) {
  CheckMlpParams(spec, params);
  Require(batch.cols() == spec.input_width(), ErrorCode::kConfig,
          "batch width does not match MLP input width");
  Tensor2 x = batch;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    x = Affine(x, params.entries()[2 * l].tensor,
               params.entries()[2 * l + 1].tensor);
    ApplyActivation(spec.activations[l], x);
  }
  return x;
}

MlpGrads MlpBackward(const MlpTape& tape, const Tensor2& upstream) {
  const std::size_t layers = tape.spec.num_layers();
  Require(layers > 0 && tape.inputs.size() == layers &&
              tape.pre.size() == layers,
          ErrorCode::kInternal, "MLP tape is incomplete");
  Require(upstream.SameShape(tape.output), ErrorCode::kInternal,
          "upstream gradient " + upstream.ShapeString() +
              " does not match tape output " + tape.output.ShapeString());
  MlpGrads grads;
  grads.params = tape.params.ZerosLike();
  Tensor2 g = upstream;
  for (std::size_t l = layers; l-- > 0;) {
    ActivationBackward(tape.spec.activations[l], tape.pre[l], g);
    const auto& w = tape.params.entries()[2 * l].tensor;
    grads.params.entries()[2 * l].tensor = MatMulTransA(tape.inputs[l], g);
    auto& db = grads.params.entries()[2 * l + 1].tensor;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const auto r = g.row(i);
      auto dst = db.row(0);
      for (std::size_t j = 0; j < r.size(); ++j) dst[j] += r[j];
    }
    g = MatMulTransB(g, w);
  }
  grads.input = std::move(g);
  return grads;
}

}  // namespace nmoe
