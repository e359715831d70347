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

#include "pkre/error.hpp"

namespace pkre {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMalformedRecord: return "malformed_record";
    case ErrorCode::kTokenCountMismatch: return "token_count_mismatch";
    case ErrorCode::kPathFailure: return "path_failure";
    case ErrorCode::kZeroVector: return "zero_vector";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kMissingEmbedding: return "missing_embedding";
    case ErrorCode::kBackendUnavailable: return "backend_unavailable";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kUnknownId: return "unknown_id";
    case ErrorCode::kAlreadyLabeled: return "already_labeled";
    case ErrorCode::kUnknownLabel: return "unknown_label";
    case ErrorCode::kIdMismatch: return "id_mismatch";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

int exit_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kMissingEmbedding:
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kZeroVector:
      return 2;
    case ErrorCode::kInternal:
      return 3;
    default:
      return 1;
  }
}

}  // namespace pkre
