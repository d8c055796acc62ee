// Copyright 2026 The milrw Authors.
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

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace milrw {

// Every failure the library surfaces carries one of these codes. The
// machine-readable spelling (code_name) is part of the HTTP contract.
enum class Errc {
  kUnbalancedBrackets,
  kNestedBrackets,
  kEmptyRewriteSpan,
  kReservedMarker,
  kNoDemarcations,
  kUnbalancedMarkers,
  kNoMarkers,
  kInvalidDraft,
  kInvalidConfig,
  kInvalidArgument,
  kBackendUnavailable,
  kNoCandidates,
  kMalformedResponse,
  kInfillFailed,
  kRangeOutOfBounds,
  kInvalidRecord,
  kIoError,
  kPoolExhausted,
  kUnknownSession,
  kSessionNotActive,
  kUnknownRequest,
  kAlreadyDecided,
  kBadIndex,
  kTooShort,
  kTooFewRequests,
  kSurveyOutOfRange,
  kNotSubmitted,
  kAlreadySurveyed,
  kCorruptLog,
  kInsufficientBase,
  kEmptySuggestion,
  kMissingSurvey,
  kMalformedRecord,
};

std::string_view code_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const { return code_; }
  std::string_view name() const { return code_name(code_); }

  // Gate failures report what was observed versus what is needed.
  std::optional<std::int64_t> actual;
  std::optional<std::int64_t> required;
  // 1-based line number for log and JSONL readers.
  std::optional<std::size_t> line;

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace milrw
