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

#include "nmoe/rng.h"

#include <numeric>
#include <utility>

namespace nmoe {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t DeriveSeed(std::uint64_t base, Stream stream,
                         std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = SplitMix64(base);
  h = SplitMix64(h ^ static_cast<std::uint64_t>(stream));
  for (std::uint64_t i : indices) h = SplitMix64(h ^ (i + 0x51ed27ULL));
  return h;
}

std::size_t UniformIndex(std::size_t n, Engine& engine) {
  // Rejection sampling keeps the draw unbiased and implementation-defined
  // only by the engine.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = Engine::max() - Engine::max() % range;
  std::uint64_t v;
  do {
    v = engine();
  } while (v >= limit);
  return static_cast<std::size_t>(v % range);
}

std::vector<std::size_t> Permutation(std::size_t n, Engine& engine) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(p[i - 1], p[UniformIndex(i, engine)]);
  }
  return p;
}

}  // namespace nmoe
