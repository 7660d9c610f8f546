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

#ifndef NMOE_METRICS_H_
#define NMOE_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nmoe/tensor.h"

namespace nmoe {

// counts[truth][predicted].
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::vector<std::int64_t>> counts;

  explicit ConfusionMatrix(int classes = 0);
  std::int64_t total() const;
  void Add(const ConfusionMatrix& other);
};

// All of these throw kData on empty input, length mismatch, or labels and
// predictions outside [0, num_classes).
ConfusionMatrix Confusion(std::span<const int> predictions,
                          std::span<const int> labels, int num_classes);
double Accuracy(std::span<const int> predictions, std::span<const int> labels);
double MacroF1(const ConfusionMatrix& confusion);
double MacroF1(std::span<const int> predictions, std::span<const int> labels,
               int num_classes);

struct AucResult {
  double value = 0.0;
  std::vector<int> skipped_classes;  // no positives or no negatives
};

// One-vs-rest AUC per class by the rank statistic (ties count 1/2), averaged
// over classes with at least one positive and one negative. Throws kData if
// no class is eligible.
AucResult MacroAuc(const Tensor2& scores, std::span<const int> labels);

// Argmax per row, ties to the lowest index.
std::vector<int> ArgmaxRows(const Tensor2& scores);

struct MetricSet {
  std::size_t samples = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double macro_auc = 0.0;
  std::vector<int> auc_skipped_classes;
};

struct EvalReport {
  MetricSet pooled;
  std::vector<MetricSet> per_client;
  // Unweighted means of the per-client values.
  double client_mean_accuracy = 0.0;
  double client_mean_macro_f1 = 0.0;
  double client_mean_macro_auc = 0.0;
  ConfusionMatrix confusion;  // pooled
};

struct ClientScores {
  Tensor2 scores;  // n x C class probabilities
  std::vector<int> labels;
};

MetricSet Evaluate(const Tensor2& scores, std::span<const int> labels);
EvalReport EvaluateClients(std::span<const ClientScores> clients);

}  // namespace nmoe

#endif  // NMOE_METRICS_H_
