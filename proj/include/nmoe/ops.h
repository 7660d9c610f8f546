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

#ifndef NMOE_OPS_H_
#define NMOE_OPS_H_

#include <span>

#include "nmoe/param_set.h"
#include "nmoe/tensor.h"

namespace nmoe {

struct LossAndGrad {
  double loss = 0.0;
  Tensor2 grad;
};

// Row-wise softmax with max subtraction. -inf entries map to exactly 0; a row
// that is entirely -inf throws kData.
Tensor2 Softmax(const Tensor2& logits);

// Backward of a row-wise softmax: given probabilities and dL/dprobs, returns
// dL/dlogits.
Tensor2 SoftmaxBackward(const Tensor2& probs, const Tensor2& grad_probs);

// Mean negative log-likelihood over rows; grad = (softmax - onehot) / rows.
// Labels outside [0, cols) throw kData.
LossAndGrad CrossEntropy(const Tensor2& logits, std::span<const int> labels);

// p <- p - lr * (g + weight_decay * p). Returns a new set.
ParamSet SgdStep(const ParamSet& params, const ParamSet& grads, double lr,
                 double weight_decay = 0.0);

// Rescales grads so their joint L2 norm is at most max_norm.
ParamSet GradNormalize(const ParamSet& grads, double max_norm);

}  // namespace nmoe

#endif  // NMOE_OPS_H_
