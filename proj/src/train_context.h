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

#ifndef NMOE_SRC_TRAIN_CONTEXT_H_
#define NMOE_SRC_TRAIN_CONTEXT_H_

#include <chrono>
#include <string>
#include <utility>

#include "nmoe/error.h"

namespace nmoe::internal {

// Runs fn and prefixes any library error with "<stage> client C round R".
template <typename F>
auto InContext(const std::string& stage, std::size_t client, std::size_t round,
               F&& fn) {
  try {
    return std::forward<F>(fn)();
  } catch (const Error& e) {
    throw Error(e.code(), stage + " client " + std::to_string(client) +
                              " round " + std::to_string(round) + ": " +
                              e.what());
  }
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace nmoe::internal

#endif  // NMOE_SRC_TRAIN_CONTEXT_H_
