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

#ifndef NMOE_RNG_H_
#define NMOE_RNG_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace nmoe {

// Stream tags for DeriveSeed. Every random draw in the library is keyed by
// (base seed, purpose, ...indices) so results never depend on call order.
enum class Stream : std::uint64_t {
  kData = 1,
  kPartition,
  kFeInit,
  kHeadInit,
  kExpertInit,
  kGateInit,
  kShuffle,
  kAugment,
  kCorrelation,
  kDpNoise,
  kGateNoise,
  kClientSampling,
  kPseudoLabel,
  kRandomRoute,
};

std::uint64_t SplitMix64(std::uint64_t x);

std::uint64_t DeriveSeed(std::uint64_t base, Stream stream,
                         std::initializer_list<std::uint64_t> indices = {});

using Engine = std::mt19937_64;

inline Engine MakeEngine(std::uint64_t base, Stream stream,
                         std::initializer_list<std::uint64_t> indices = {}) {
  return Engine(DeriveSeed(base, stream, indices));
}

// Fisher-Yates with an explicit uniform draw, so the permutation does not
// depend on the standard library's shuffle implementation.
std::vector<std::size_t> Permutation(std::size_t n, Engine& engine);

// Uniform integer in [0, n).
std::size_t UniformIndex(std::size_t n, Engine& engine);

}  // namespace nmoe

#endif  // NMOE_RNG_H_
