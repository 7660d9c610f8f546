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

#include "nmoe/param_set.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <utility>

#include "nmoe/error.h"

namespace nmoe {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void FnvMix(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

void ParamSet::Add(std::string name, Tensor2 tensor) {
  Require(!Contains(name), ErrorCode::kConfig,
          "duplicate parameter name '" + name + "'");
  entries_.push_back({std::move(name), std::move(tensor)});
}

bool ParamSet::Contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

const Tensor2& ParamSet::Get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  Fail(ErrorCode::kConfig, "missing parameter '" + std::string(name) + "'");
}

Tensor2& ParamSet::Get(std::string_view name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  Fail(ErrorCode::kConfig, "missing parameter '" + std::string(name) + "'");
}

bool ParamSet::ShapeCompatible(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        !entries_[i].tensor.SameShape(other.entries_[i].tensor)) {
      return false;
    }
  }
  return true;
}

void ParamSet::RequireCompatible(const ParamSet& other,
                                 std::string_view what) const {
  if (ShapeCompatible(other)) return;
  std::string detail;
  if (entries_.size() != other.entries_.size()) {
    detail = std::to_string(entries_.size()) + " vs " +
             std::to_string(other.entries_.size()) + " tensors";
  } else {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& a = entries_[i];
      const auto& b = other.entries_[i];
      if (a.name != b.name || !a.tensor.SameShape(b.tensor)) {
        detail = a.name + a.tensor.ShapeString() + " vs " + b.name +
                 b.tensor.ShapeString();
        break;
      }
    }
  }
  Fail(ErrorCode::kConfig,
       std::string(what) + ": incompatible parameter sets (" + detail + ")");
}

ParamSet ParamSet::ZerosLike() const {
  ParamSet out;
  for (const auto& e : entries_) {
    out.entries_.push_back({e.name, Tensor2(e.tensor.rows(), e.tensor.cols())});
  }
  return out;
}

std::size_t ParamSet::NumScalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

bool ParamSet::AllFinite() const {
  for (const auto& e : entries_) {
    if (!e.tensor.AllFinite()) return false;
  }
  return true;
}

void ParamSet::AddScaled(const ParamSet& other, double scale) {
  RequireCompatible(other, "AddScaled");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto dst = entries_[i].tensor.data();
    const auto src = other.entries_[i].tensor.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

ParamSet ParamSet::Scaled(double scale) const {
  ParamSet out = *this;
  for (auto& e : out.entries_) {
    for (double& v : e.tensor.data()) v *= scale;
  }
  return out;
}

std::uint64_t ParamSet::Hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& e : entries_) {
    FnvMix(h, e.name.data(), e.name.size());
    const std::uint64_t shape[2] = {e.tensor.rows(), e.tensor.cols()};
    FnvMix(h, shape, sizeof(shape));
    const auto data = e.tensor.data();
    FnvMix(h, data.data(), data.size() * sizeof(double));
  }
  return h;
}

double GlobalNorm(const ParamSet& params) {
  double s = 0.0;
  for (const auto& e : params.entries()) {
    for (double v : e.tensor.data()) s += v * v;
  }
  return std::sqrt(s);
}

std::string HashHex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace nmoe
