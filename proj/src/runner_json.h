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

#ifndef NMOE_SRC_RUNNER_JSON_H_
#define NMOE_SRC_RUNNER_JSON_H_

#include "json.hpp"
#include "nmoe/runner.h"

namespace nmoe::internal {

inline nlohmann::json MetricJson(const MetricSet& m) {
  return {{"samples", m.samples},
          {"accuracy", m.accuracy},
          {"macro_f1", m.macro_f1},
          {"macro_auc", m.macro_auc},
          {"auc_skipped_classes", m.auc_skipped_classes}};
}

inline nlohmann::json EvalJson(const EvalReport& e) {
  nlohmann::json per_client = nlohmann::json::array();
  for (const auto& m : e.per_client) per_client.push_back(MetricJson(m));
  return {{"pooled", MetricJson(e.pooled)},
          {"per_client", per_client},
          {"client_mean_accuracy", e.client_mean_accuracy},
          {"client_mean_macro_f1", e.client_mean_macro_f1},
          {"client_mean_macro_auc", e.client_mean_macro_auc},
          {"confusion", e.confusion.counts}};
}

inline nlohmann::json RoutingJson(const SystemEval& s) {
  return {{"counts", s.log.counts},
          {"bytes_out", s.log.bytes_out},
          {"bytes_back", s.log.bytes_back},
          {"local_ratio", s.local_ratio},
          {"diagonal_dominant", s.diagonal_dominant}};
}

inline nlohmann::json RoundJson(const FedRoundReport& r) {
  return {{"type", "round"},
          {"stage", r.stage},
          {"round", r.round},
          {"participants", r.participants},
          {"client_losses", r.client_losses},
          {"params_hash", r.params_hash},
          {"bytes", r.bytes}};
}

}  // namespace nmoe::internal

#endif  // NMOE_SRC_RUNNER_JSON_H_
