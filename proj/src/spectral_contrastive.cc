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
#include <random>
#include <string>

#include "nmoe/error.h"
#include "nmoe/fed_train.h"
#include "nmoe/ops.h"
#include "nmoe/rng.h"

namespace nmoe {

SpectralLoss SpectralContrastiveLocalLoss(const Tensor2& z1, const Tensor2& z2,
                                          const Tensor2& rbar, double q) {
  Require(z1.SameShape(z2) && z1.rows() > 0, ErrorCode::kConfig,
          "views must be nonempty with equal shapes, got " + z1.ShapeString() +
              " and " + z2.ShapeString());
  const std::size_t n = z1.rows(), d = z1.cols();
  Require(rbar.rows() == d && rbar.cols() == d, ErrorCode::kConfig,
          "aggregate correlation must be " + std::to_string(d) + "x" +
              std::to_string(d) + ", got " + rbar.ShapeString());
  const double inv_n = 1.0 / static_cast<double>(n);

  double cross = 0.0;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    cross += z1.data()[i] * z2.data()[i];
  }
  cross *= inv_n;

  Tensor2 r = MatMulTransA(z1, z1);
  const Tensor2 r2 = MatMulTransA(z2, z2);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.data()[i] = (r.data()[i] + r2.data()[i]) * (0.5 * inv_n);
  }
  double frob2 = 0.0, coupling = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      frob2 += r(a, b) * r(a, b);
      coupling += r(a, b) * rbar(b, a);
    }
  }
  SpectralLoss out;
  out.loss = -cross + 0.5 * q * frob2 + (1.0 - q) * coupling;

  // Both R and rbar + rbar^T are symmetric, so the row-vector products below
  // equal the column-vector form.
  Tensor2 mix(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      mix(a, b) = q * inv_n * r(a, b) +
                  (1.0 - q) * 0.5 * inv_n * (rbar(a, b) + rbar(b, a));
    }
  }
  out.grad_z1 = MatMul(z1, mix);
  out.grad_z2 = MatMul(z2, mix);
  for (std::size_t i = 0; i < z1.size(); ++i) {
    out.grad_z1.data()[i] -= z2.data()[i] * inv_n;
    out.grad_z2.data()[i] -= z1.data()[i] * inv_n;
  }
  return out;
}

Tensor2 CorrelationMatrix(const Tensor2& z) {
  Require(z.rows() > 0, ErrorCode::kData, "correlation of an empty batch");
  Tensor2 r = MatMulTransA(z, z);
  const double inv_n = 1.0 / static_cast<double>(z.rows());
  for (double& v : r.data()) v *= inv_n;
  return r;
}

Tensor2 AggregateOthers(std::span<const Tensor2> shares,
                        std::span<const double> q, std::size_t i) {
  Require(shares.size() == q.size() && i < shares.size(), ErrorCode::kInternal,
          "aggregate needs one weight per share");
  const std::size_t d = shares[i].rows();
  Tensor2 out(d, d);
  if (shares.size() == 1) return out;
  Require(q[i] < 1.0, ErrorCode::kInternal,
          "client " + std::to_string(i) +
              " has weight 1 while other clients are present");
  const double scale = 1.0 / (1.0 - q[i]);
  for (std::size_t j = 0; j < shares.size(); ++j) {
    if (j == i) continue;
    Require(shares[j].SameShape(out), ErrorCode::kInternal,
            "correlation shares differ in shape");
    for (std::size_t t = 0; t < out.size(); ++t) {
      out.data()[t] += scale * q[j] * shares[j].data()[t];
    }
  }
  return out;
}

CorrelationShare ShareCorrelation(const MlpSpec& fe_spec, const ParamSet& fe,
                                  const Dataset& shard, std::size_t client,
                                  double q, const FedScOptions& options,
                                  std::uint64_t seed, std::size_t round) {
  const auto views =
      Augment(options.augment, shard.features,
              DeriveSeed(seed, Stream::kCorrelation, {round, client}));
  CorrelationShare share;
  share.client_id = client;
  share.q = q;
  share.clean = CorrelationMatrix(MlpApply(fe_spec, fe, views.first));
  const std::size_t d = share.clean.rows();
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      Require(std::abs(share.clean(a, b) - share.clean(b, a)) <= 1e-9,
              ErrorCode::kInternal, "correlation matrix is not symmetric");
    }
  }
  share.shared = share.clean;
  if (options.dp_noise_std > 0.0) {
    Engine engine = MakeEngine(seed, Stream::kDpNoise, {round, client});
    std::normal_distribution<double> noise(0.0, options.dp_noise_std);
    for (double& v : share.shared.data()) v += noise(engine);
  }
  return share;
}

double SpectralEpoch(const MlpSpec& fe_spec, ParamSet& fe,
                     const Tensor2& inputs, const Tensor2& rbar, double q,
                     const FedScOptions& options, const SgdOptions& sgd,
                     std::uint64_t seed, Phase phase, std::size_t client,
                     std::size_t global_epoch) {
  const std::size_t n = inputs.rows();
  Require(n > 0, ErrorCode::kData, "training set is empty");
  Require(sgd.batch_size > 0, ErrorCode::kConfig, "batch size must be > 0");
  Engine engine(EpochSeed(seed, phase, client, global_epoch));
  const std::vector<std::size_t> order = Permutation(n, engine);
  double total = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < n; start += sgd.batch_size, ++batch_index) {
    const std::size_t end = std::min(n, start + sgd.batch_size);
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    const auto views = Augment(
        options.augment, SelectRows(inputs, idx),
        DeriveSeed(seed, Stream::kAugment,
                   {static_cast<std::uint64_t>(phase), client, global_epoch,
                    batch_index}));
    const auto f1 = MlpForward(fe_spec, fe, views.first);
    const auto f2 = MlpForward(fe_spec, fe, views.second);
    const auto loss = SpectralContrastiveLocalLoss(f1.output, f2.output, rbar, q);
    if (!std::isfinite(loss.loss)) {
      Fail(ErrorCode::kTraining, "non-finite spectral loss");
    }
    ParamSet grad = MlpBackward(f1.tape, loss.grad_z1).params;
    grad.AddScaled(MlpBackward(f2.tape, loss.grad_z2).params, 1.0);
    if (sgd.max_grad_norm) grad = GradNormalize(grad, *sgd.max_grad_norm);
    fe = SgdStep(fe, grad, sgd.lr, sgd.weight_decay);
    total += loss.loss * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(n);
}

}  // namespace nmoe
