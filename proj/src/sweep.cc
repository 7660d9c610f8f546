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
#include <cstdio>
#include <string>

#include "nmoe/error.h"
#include "nmoe/runner.h"

namespace nmoe {

SweepAxis ParseSweepAxis(std::string_view name) {
  if (name == "clients") return SweepAxis::kClients;
  if (name == "k") return SweepAxis::kK;
  if (name == "tau") return SweepAxis::kTau;
  Fail(ErrorCode::kConfig, "sweep axis must be clients, k or tau, got '" +
                               std::string(name) + "'");
}

std::string_view SweepAxisName(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kClients:
      return "clients";
    case SweepAxis::kK:
      return "k";
    case SweepAxis::kTau:
      return "tau";
  }
  return "unknown";
}

RunConfig SweepPoint(const RunConfig& base, SweepAxis axis, double value) {
  RunConfig c = base;
  auto as_count = [&](const char* what) {
    Require(value >= 1.0 && std::floor(value) == value, ErrorCode::kConfig,
            std::string(what) + " sweep values must be positive integers");
    return static_cast<std::size_t>(value);
  };
  switch (axis) {
    case SweepAxis::kClients: {
      const std::size_t m = as_count("client");
      auto& p = c.data.partition;
      const std::size_t train_total = p.num_clients * p.train_per_client;
      const std::size_t test_total = p.num_clients * p.test_per_client;
      p.num_clients = m;
      p.train_per_client = train_total / m;
      p.test_per_client = test_total / m;
      break;
    }
    case SweepAxis::kK:
      c.k = as_count("k");
      c.stage3.fedgate.k = c.k;
      break;
    case SweepAxis::kTau:
      c.data.partition.tau = value;
      break;
  }
  return c;
}

std::vector<SweepRow> RunAblation(const RunConfig& base, SweepAxis axis,
                                  const std::vector<double>& values) {
  Require(!values.empty(), ErrorCode::kConfig, "sweep has no values");
  std::vector<SweepRow> rows;
  for (double v : values) {
    SweepRow row;
    row.value = v;
    try {
      const RunResult r = RunPipeline(SweepPoint(base, axis, v));
      row.ok = true;
      row.eval = r.system.eval;
      row.local_ratio = r.system.local_ratio;
      for (const auto& rep : r.reports) row.training_bytes += rep.bytes;
      row.inference_bytes = r.system.log.bytes_out + r.system.log.bytes_back;
    } catch (const Error& e) {
      row.error = std::string(ErrorCodeName(e.code())) + ": " + e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string CsvField(std::string s) {
  for (char& ch : s) {
    if (ch == '"' || ch == '\n') ch = '\'';
  }
  return "\"" + s + "\"";
}

}  // namespace

std::string SweepCsv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::string out = std::string(SweepAxisName(axis)) +
                    ",status,accuracy,macro_f1,macro_auc,client_mean_accuracy,"
                    "local_ratio,training_bytes,inference_bytes,error\n";
  for (const auto& r : rows) {
    std::string value = std::floor(r.value) == r.value
                            ? std::to_string(static_cast<long long>(r.value))
                            : Fixed(r.value);
    out += value + (r.ok ? ",ok," : ",failed,");
    if (r.ok) {
      out += Fixed(r.eval.pooled.accuracy) + "," +
             Fixed(r.eval.pooled.macro_f1) + "," +
             Fixed(r.eval.pooled.macro_auc) + "," +
             Fixed(r.eval.client_mean_accuracy) + "," + Fixed(r.local_ratio) +
             "," + std::to_string(r.training_bytes) + "," +
             std::to_string(r.inference_bytes) + ",\n";
    } else {
      out += ",,,,,,," + CsvField(r.error) + "\n";
    }
  }
  return out;
}

}  // namespace nmoe
