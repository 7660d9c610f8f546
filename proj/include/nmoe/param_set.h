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

#ifndef NMOE_PARAM_SET_H_
#define NMOE_PARAM_SET_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nmoe/tensor.h"

namespace nmoe {

// Ordered, uniquely named collection of tensors for one subnetwork. This is
// the unit that federated averaging exchanges.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor2 tensor;

    bool operator==(const Entry&) const = default;
  };

  ParamSet() = default;

  // Throws kConfig on a duplicate name.
  void Add(std::string name, Tensor2 tensor);

  bool Contains(std::string_view name) const;
  const Tensor2& Get(std::string_view name) const;
  Tensor2& Get(std::string_view name);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Same names in the same order with the same per-name shapes.
  bool ShapeCompatible(const ParamSet& other) const;
  // Throws kConfig naming the first difference.
  void RequireCompatible(const ParamSet& other, std::string_view what) const;

  ParamSet ZerosLike() const;
  std::size_t NumScalars() const;
  bool AllFinite() const;

  // this += scale * other.
  void AddScaled(const ParamSet& other, double scale);
  ParamSet Scaled(double scale) const;

  // FNV-1a over names, shapes and the raw bytes of every value. Used to
  // check frozen-parameter contracts and to tag round reports.
  std::uint64_t Hash() const;

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<Entry> entries_;
};

// Global L2 norm over every tensor in the set.
double GlobalNorm(const ParamSet& params);

std::string HashHex(std::uint64_t hash);

}  // namespace nmoe

#endif  // NMOE_PARAM_SET_H_
