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

#ifndef NMOE_ERROR_H_
#define NMOE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace nmoe {

// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorCode {
  kConfig = 2,    // invalid configuration or shape mismatch
  kData = 3,      // malformed or insufficient data
  kFormat = 4,    // unreadable file layout
  kTraining = 5,  // divergence or non-finite loss
  kIo = 6,        // filesystem failure
  kInternal = 7,  // broken internal contract
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return "config";
    case ErrorCode::kData:
      return "data";
    case ErrorCode::kFormat:
      return "format";
    case ErrorCode::kTraining:
      return "training";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kInternal:
      return "internal";
  }
  return "unknown";
}

}  // namespace nmoe

#endif  // NMOE_ERROR_H_
