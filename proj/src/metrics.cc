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

#include "nmoe/metrics.h"

#include <algorithm>
#include <numeric>
#include <string>

#include "nmoe/error.h"

namespace nmoe {
namespace {

void CheckInputs(std::span<const int> predictions, std::span<const int> labels) {
  Require(!labels.empty(), ErrorCode::kData, "metrics of an empty sample");
  Require(predictions.size() == labels.size(), ErrorCode::kData,
          "prediction count " + std::to_string(predictions.size()) +
              " != label count " + std::to_string(labels.size()));
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int classes)
    : num_classes(classes),
      counts(static_cast<std::size_t>(classes),
             std::vector<std::int64_t>(static_cast<std::size_t>(classes), 0)) {}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts) {
    for (auto c : row) t += c;
  }
  return t;
}

void ConfusionMatrix::Add(const ConfusionMatrix& other) {
  Require(other.num_classes == num_classes, ErrorCode::kData,
          "confusion matrices differ in class count");
  for (int t = 0; t < num_classes; ++t) {
    for (int p = 0; p < num_classes; ++p) counts[t][p] += other.counts[t][p];
  }
}

ConfusionMatrix Confusion(std::span<const int> predictions,
                          std::span<const int> labels, int num_classes) {
  CheckInputs(predictions, labels);
  Require(num_classes > 0, ErrorCode::kData, "need at least one class");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Require(labels[i] >= 0 && labels[i] < num_classes && predictions[i] >= 0 &&
                predictions[i] < num_classes,
            ErrorCode::kData,
            "class id out of range at sample " + std::to_string(i));
    ++cm.counts[labels[i]][predictions[i]];
  }
  return cm;
}

double Accuracy(std::span<const int> predictions, std::span<const int> labels) {
  CheckInputs(predictions, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += predictions[i] == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double MacroF1(const ConfusionMatrix& cm) {
  Require(cm.num_classes > 0 && cm.total() > 0, ErrorCode::kData,
          "macro F1 of an empty confusion matrix");
  double sum = 0.0;
  for (int c = 0; c < cm.num_classes; ++c) {
    std::int64_t tp = cm.counts[c][c], predicted = 0, actual = 0;
    for (int o = 0; o < cm.num_classes; ++o) {
      predicted += cm.counts[o][c];
      actual += cm.counts[c][o];
    }
    // 2PR/(P+R) simplifies to 2TP/(predicted + actual).
    if (tp > 0) {
      sum += 2.0 * static_cast<double>(tp) /
             static_cast<double>(predicted + actual);
    }
  }
  return sum / static_cast<double>(cm.num_classes);
}

double MacroF1(std::span<const int> predictions, std::span<const int> labels,
               int num_classes) {
  return MacroF1(Confusion(predictions, labels, num_classes));
}

AucResult MacroAuc(const Tensor2& scores, std::span<const int> labels) {
  const std::size_t n = scores.rows();
  Require(n > 0 && n == labels.size(), ErrorCode::kData,
          "score rows must match a nonempty label list");
  const int classes = static_cast<int>(scores.cols());
  std::vector<std::size_t> order(n);
  std::vector<double> rank(n);
  AucResult result;
  double sum = 0.0;
  int eligible = 0;
  for (int c = 0; c < classes; ++c) {
    std::size_t positives = 0;
    for (int y : labels) {
      Require(y >= 0 && y < classes, ErrorCode::kData, "label out of range");
      positives += y == c;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
      result.skipped_classes.push_back(c);
      continue;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores(a, c) < scores(b, c);
    });
    // Midranks (1-based) over runs of equal scores.
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && scores(order[j + 1], c) == scores(order[i], c)) ++j;
      const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
      i = j + 1;
    }
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == c) rank_sum += rank[i];
    }
    const double p = static_cast<double>(positives);
    sum += (rank_sum - p * (p + 1.0) / 2.0) /
           (p * static_cast<double>(negatives));
    ++eligible;
  }
  Require(eligible > 0, ErrorCode::kData,
          "AUC undefined: no class has both positives and negatives");
  result.value = sum / eligible;
  return result;
}

std::vector<int> ArgmaxRows(const Tensor2& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) -
                              row.begin());
  }
  return out;
}

MetricSet Evaluate(const Tensor2& scores, std::span<const int> labels) {
  const std::vector<int> predictions = ArgmaxRows(scores);
  MetricSet m;
  m.samples = labels.size();
  m.accuracy = Accuracy(predictions, labels);
  m.macro_f1 =
      MacroF1(predictions, labels, static_cast<int>(scores.cols()));
  auto auc = MacroAuc(scores, labels);
  m.macro_auc = auc.value;
  m.auc_skipped_classes = std::move(auc.skipped_classes);
  return m;
}

EvalReport EvaluateClients(std::span<const ClientScores> clients) {
  Require(!clients.empty(), ErrorCode::kData, "no clients to evaluate");
  const std::size_t classes = clients.front().scores.cols();
  EvalReport report;
  report.confusion = ConfusionMatrix(static_cast<int>(classes));
  std::vector<Tensor2> all_scores;
  std::vector<int> all_labels;
  for (const auto& client : clients) {
    Require(client.scores.cols() == classes, ErrorCode::kData,
            "clients disagree on class count");
    report.per_client.push_back(Evaluate(client.scores, client.labels));
    report.confusion.Add(Confusion(ArgmaxRows(client.scores), client.labels,
                                   static_cast<int>(classes)));
    all_scores.push_back(client.scores);
    all_labels.insert(all_labels.end(), client.labels.begin(),
                      client.labels.end());
  }
  report.pooled = Evaluate(ConcatRows(all_scores), all_labels);
  for (const auto& m : report.per_client) {
    report.client_mean_accuracy += m.accuracy;
    report.client_mean_macro_f1 += m.macro_f1;
    report.client_mean_macro_auc += m.macro_auc;
  }
  const double count = static_cast<double>(clients.size());
  report.client_mean_accuracy /= count;
  report.client_mean_macro_f1 /= count;
  report.client_mean_macro_auc /= count;
  return report;
}

}  // namespace nmoe
