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

#include "nmoe/ops.h"

#include <cmath>
#include <limits>

#include "nmoe/error.h"

namespace nmoe {

Tensor2 Softmax(const Tensor2& logits) {
  Tensor2 out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto in = logits.row(i);
    auto dst = out.row(i);
    double max = -std::numeric_limits<double>::infinity();
    for (double v : in) {
      Require(!std::isnan(v) && v != std::numeric_limits<double>::infinity(),
              ErrorCode::kData, "softmax input must be finite or -inf");
      if (v > max) max = v;
    }
    if (!std::isfinite(max)) {
      Fail(ErrorCode::kData,
           "softmax row " + std::to_string(i) + " is entirely -inf");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      dst[j] = std::isinf(in[j]) ? 0.0 : std::exp(in[j] - max);
      sum += dst[j];
    }
    for (double& v : dst) v /= sum;
  }
  return out;
}

Tensor2 SoftmaxBackward(const Tensor2& probs, const Tensor2& grad_probs) {
  Require(probs.SameShape(grad_probs), ErrorCode::kInternal,
          "softmax backward shape mismatch");
  Tensor2 out(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto p = probs.row(i);
    const auto g = grad_probs.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) dot += p[j] * g[j];
    auto dst = out.row(i);
    for (std::size_t j = 0; j < p.size(); ++j) dst[j] = p[j] * (g[j] - dot);
  }
  return out;
}

LossAndGrad CrossEntropy(const Tensor2& logits, std::span<const int> labels) {
  Require(labels.size() == logits.rows(), ErrorCode::kData,
          "label count does not match logits rows");
  Require(logits.rows() > 0, ErrorCode::kData, "cross entropy of empty batch");
  const std::size_t n = logits.rows(), c = logits.cols();
  LossAndGrad out;
  out.grad = Tensor2(n, c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (!(y >= 0 && static_cast<std::size_t>(y) < c)) {
      Fail(ErrorCode::kData, "label " + std::to_string(y) +
                                 " out of range [0, " + std::to_string(c) + ")");
    }
    const auto z = logits.row(i);
    double max = z[0];
    for (double v : z) max = v > max ? v : max;
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - max);
    const double log_sum = std::log(sum);
    total += -(z[y] - max - log_sum);
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < c; ++j) {
      g[j] = std::exp(z[j] - max - log_sum) / static_cast<double>(n);
    }
    g[y] -= 1.0 / static_cast<double>(n);
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

ParamSet SgdStep(const ParamSet& params, const ParamSet& grads, double lr,
                 double weight_decay) {
  params.RequireCompatible(grads, "SgdStep");
  ParamSet out = params;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto p = out.entries()[i].tensor.data();
    const auto g = grads.entries()[i].tensor.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] = p[j] - lr * (g[j] + weight_decay * p[j]);
    }
  }
  return out;
}

ParamSet GradNormalize(const ParamSet& grads, double max_norm) {
  Require(max_norm > 0.0, ErrorCode::kConfig, "max norm must be positive");
  const double norm = GlobalNorm(grads);
  if (!(norm > max_norm)) return grads;
  return grads.Scaled(max_norm / norm);
}

}  // namespace nmoe
