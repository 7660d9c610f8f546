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

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmoe/error.h"
#include "nmoe/ops.h"
#include "nmoe/rng.h"
#include "nmoe/runner.h"
#include "runner_json.h"
#include "train_context.h"

namespace nmoe {
namespace {

// Each client classifies its own test shard with its own end-to-end model;
// nothing leaves the client.
SystemEval LocalSystemEval(const MlpSpec& fe_spec,
                           std::span<const ParamSet> fes,
                           const MlpSpec& head_spec,
                           std::span<const ParamSet> heads,
                           const PreparedData& data) {
  std::vector<ClientScores> scores;
  std::vector<std::size_t> sizes;
  for (std::size_t c = 0; c < data.test.size(); ++c) {
    const Tensor2 h = MlpApply(fe_spec, fes[c], data.test[c].features);
    scores.push_back(
        {Softmax(MlpApply(head_spec, heads[c], h)), data.test[c].labels});
    sizes.push_back(data.test[c].size());
  }
  SystemEval out;
  out.eval = EvaluateClients(scores);
  out.log = LocalOnlyLog(sizes);
  out.local_ratio = LocalRatio(out.log);
  out.diagonal_dominant = DiagonalDominant(out.log);
  return out;
}

std::uint64_t Combine(std::uint64_t h, std::uint64_t v) {
  return h * 1099511628211ULL ^ v;
}

}  // namespace

BaselineResult LocalClassifierBaseline(const RunConfig& config,
                                       const PreparedData& data) {
  const MlpSpec fe_spec = config.model.FeSpec(data.input_dim);
  const MlpSpec head_spec =
      config.model.ExpertSpec(static_cast<std::size_t>(data.num_classes));
  const FedSchedule schedule{.rounds = config.baselines.epochs,
                             .local_epochs = 1,
                             .sgd = config.baselines.sgd,
                             .bytes_per_scalar = config.bytes_per_scalar};
  BaselineResult out;
  out.name = "local_classifier";
  std::vector<ParamSet> fes, heads;
  for (std::size_t c = 0; c < data.train.size(); ++c) {
    Stage1Result r = CentralizedCe(data.train[c], fe_spec, head_spec, schedule,
                                   config.seed, Phase::kLocalClassifier, c);
    FedRoundReport last = r.reports.back();
    last.stage = "baseline_local_classifier";
    last.participants = {c};
    out.reports.push_back(std::move(last));
    fes.push_back(std::move(r.fe));
    heads.push_back(std::move(r.heads.at(0)));
  }
  out.system = LocalSystemEval(fe_spec, fes, head_spec, heads, data);
  return out;
}

BaselineResult FedAvgClassifierBaseline(const RunConfig& config,
                                        const PreparedData& data) {
  const MlpSpec fe_spec = config.model.FeSpec(data.input_dim);
  const MlpSpec head_spec =
      config.model.ExpertSpec(static_cast<std::size_t>(data.num_classes));
  const FedSchedule& schedule = config.stage1.schedule;
  const std::uint64_t seed = config.seed;
  const std::size_t m = data.train.size();
  ParamSet fe = InitMlp(fe_spec, DeriveSeed(seed, Stream::kFeInit));
  ParamSet head = InitMlp(head_spec, DeriveSeed(seed, Stream::kHeadInit, {0}));
  const std::uint64_t model_bytes =
      (fe.NumScalars() + head.NumScalars()) * config.bytes_per_scalar;
  BaselineResult out;
  out.name = "fedavg_classifier";
  for (std::size_t r = 0; r < schedule.rounds; ++r) {
    internal::Stopwatch clock;
    FedRoundReport report;
    report.stage = "baseline_fedavg_classifier";
    report.round = r;
    std::vector<ParamSet> fes, heads;
    std::vector<double> weights;
    for (std::size_t i = 0; i < m; ++i) {
      ParamSet f = fe, h = head;
      double loss = 0.0;
      for (std::size_t e = 0; e < schedule.local_epochs; ++e) {
        loss = internal::InContext("fedavg classifier", i, r, [&] {
          return ClassifierEpoch(
              &fe_spec, &f, head_spec, h, data.train[i].features,
              data.train[i].labels, schedule.sgd,
              EpochSeed(seed, Phase::kFedAvgClassifier, i,
                        r * schedule.local_epochs + e));
        });
      }
      report.participants.push_back(i);
      report.client_losses.push_back(loss);
      fes.push_back(std::move(f));
      heads.push_back(std::move(h));
      weights.push_back(static_cast<double>(data.train[i].size()));
    }
    fe = FedAvg(fes, weights);
    head = FedAvg(heads, weights);
    report.params_hash = HashHex(Combine(fe.Hash(), head.Hash()));
    report.bytes = m * 2 * model_bytes;
    report.wall_seconds = clock.Seconds();
    out.reports.push_back(std::move(report));
  }
  const std::vector<ParamSet> fes(m, fe), heads(m, head);
  out.system = LocalSystemEval(fe_spec, fes, head_spec, heads, data);
  return out;
}

BaselineResult CentralizedMoeBaseline(const RunConfig& config,
                                      const PreparedData& data,
                                      NmoeModel* trained) {
  const std::uint64_t seed = config.seed;
  const std::size_t m = data.train.size();
  const Dataset pooled = Concat(data.train);
  NmoeModel model;
  model.fe_spec = config.model.FeSpec(data.input_dim);
  model.expert_spec =
      config.model.ExpertSpec(static_cast<std::size_t>(data.num_classes));
  model.fe = InitMlp(model.fe_spec, DeriveSeed(seed, Stream::kFeInit));
  for (std::size_t i = 0; i < m; ++i) {
    model.experts.push_back(InitMlp(
        model.expert_spec, DeriveSeed(seed, Stream::kExpertInit, {i})));
  }
  model.gate = LinearGate::Init(model.latent_dim(), m,
                                DeriveSeed(seed, Stream::kGateInit),
                                config.stage3.gate_noise_std);
  model.Validate();

  const SgdOptions& sgd = config.baselines.sgd;
  const double lambda = config.baselines.lambda_load;
  const std::size_t n = pooled.size();
  BaselineResult out;
  out.name = "centralized_moe";
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < config.baselines.epochs; ++epoch) {
    internal::Stopwatch clock;
    Engine engine(EpochSeed(seed, Phase::kCentralizedMoe, 0, epoch));
    const std::vector<std::size_t> order = Permutation(n, engine);
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n;
         start += sgd.batch_size, ++batch_index) {
      const std::size_t end = std::min(n, start + sgd.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      batch_labels.clear();
      for (std::size_t i : idx) batch_labels.push_back(pooled.labels[i]);
      const MoeOptions moe{
          .k = config.k,
          .mode = Mode::kTrain,
          .seed = DeriveSeed(
              seed, Stream::kGateNoise,
              {static_cast<std::uint64_t>(Phase::kCentralizedMoe), 0, epoch,
               batch_index}),
          .weighting = GateWeighting::kProbability};
      const MoeOutput fwd =
          MoeForward(model, SelectRows(pooled.features, idx), moe);
      const auto ce = CrossEntropy(fwd.logits, batch_labels);
      double loss = ce.loss;
      Tensor2 grad_probs;
      if (lambda > 0.0) {
        auto lb = LoadBalanceLoss(fwd.gate.probs);
        loss += lambda * lb.loss;
        grad_probs = std::move(lb.grad);
        for (double& v : grad_probs.data()) v *= lambda;
      }
      if (!std::isfinite(loss)) {
        Fail(ErrorCode::kTraining,
             "centralized MoE epoch " + std::to_string(epoch) +
                 ": non-finite loss");
      }
      MoeGrads g = MoeBackward(model, fwd, moe, ce.grad,
                               lambda > 0.0 ? &grad_probs : nullptr);
      auto& gate = std::get<LinearGate>(model.gate);
      if (sgd.max_grad_norm) {
        double sq = 0.0;
        for (const ParamSet* p : {&g.fe, &g.gate}) {
          const double v = GlobalNorm(*p);
          sq += v * v;
        }
        for (const auto& e : g.experts) {
          const double v = GlobalNorm(e);
          sq += v * v;
        }
        const double norm = std::sqrt(sq);
        if (norm > *sgd.max_grad_norm) {
          const double s = *sgd.max_grad_norm / norm;
          g.fe = g.fe.Scaled(s);
          g.gate = g.gate.Scaled(s);
          for (auto& e : g.experts) e = e.Scaled(s);
        }
      }
      model.fe = SgdStep(model.fe, g.fe, sgd.lr, sgd.weight_decay);
      gate.params = SgdStep(gate.params, g.gate, sgd.lr, sgd.weight_decay);
      for (std::size_t i = 0; i < m; ++i) {
        model.experts[i] =
            SgdStep(model.experts[i], g.experts[i], sgd.lr, sgd.weight_decay);
      }
      total += loss * static_cast<double>(idx.size());
    }
    FedRoundReport report;
    report.stage = "baseline_centralized_moe";
    report.round = epoch;
    report.participants = {0};
    report.client_losses = {total / static_cast<double>(n)};
    std::uint64_t h = Combine(model.fe.Hash(),
                              std::get<LinearGate>(model.gate).params.Hash());
    for (const auto& e : model.experts) h = Combine(h, e.Hash());
    report.params_hash = HashHex(h);
    report.wall_seconds = clock.Seconds();
    out.reports.push_back(std::move(report));
  }
  out.system =
      EvaluateSystem(model, data, config.k, config.bytes_per_scalar, seed);
  if (trained) *trained = std::move(model);
  return out;
}

BaselineOutputs RunBaselines(const RunConfig& config,
                             const PreparedData& data) {
  return {LocalClassifierBaseline(config, data),
          FedAvgClassifierBaseline(config, data),
          CentralizedMoeBaseline(config, data)};
}

std::string BaselineJsonl(const BaselineOutputs& b) {
  std::string out;
  for (const BaselineResult* r :
       {&b.local_classifier, &b.fedavg_classifier, &b.centralized_moe}) {
    std::uint64_t training = 0;
    for (const auto& rep : r->reports) {
      out += internal::RoundJson(rep).dump() + "\n";
      training += rep.bytes;
    }
    nlohmann::json j = {{"type", "baseline"},
                        {"system", r->name},
                        {"training_bytes", training},
                        {"metrics", internal::EvalJson(r->system.eval)},
                        {"routing", internal::RoutingJson(r->system)}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace nmoe
