// Copyright 2026 The PKRE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PKRE_ERROR_HPP_
#define PKRE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace pkre {

enum class ErrorCode {
  kIo,                  // unreadable / unwritable file
  kMalformedRecord,     // input record violates the instance format
  kTokenCountMismatch,  // parse or NER length differs from the instance
  kPathFailure,         // no tree path between the two entity heads
  kZeroVector,
  kDimensionMismatch,
  kMissingEmbedding,    // file backend has no vector for a text
  kBackendUnavailable,  // HTTP backend unreachable or failing
  kFormat,              // bad magic, version, truncation
  kDuplicateId,
  kUnknownId,
  kAlreadyLabeled,
  kUnknownLabel,
  kIdMismatch,          // prediction/gold id sets differ
  kConfig,
  kInternal,
};

std::string_view error_code_name(ErrorCode code);

/// Exception type used throughout the library. The code drives both test
/// assertions and the CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// CLI exit status: 1 input error, 2 backend error, 3 internal invariant.
int exit_status_for(ErrorCode code);

}  // namespace pkre

#endif  // PKRE_ERROR_HPP_
