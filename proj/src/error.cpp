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

#include "milrw/error.hpp"

namespace milrw {

std::string_view code_name(Errc code) {
  switch (code) {
    case Errc::kUnbalancedBrackets: return "UNBALANCED_BRACKETS";
    case Errc::kNestedBrackets: return "NESTED_BRACKETS";
    case Errc::kEmptyRewriteSpan: return "EMPTY_REWRITE_SPAN";
    case Errc::kReservedMarker: return "RESERVED_MARKER";
    case Errc::kNoDemarcations: return "NO_DEMARCATIONS";
    case Errc::kUnbalancedMarkers: return "UNBALANCED_MARKERS";
    case Errc::kNoMarkers: return "NO_MARKERS";
    case Errc::kInvalidDraft: return "INVALID_DRAFT";
    case Errc::kInvalidConfig: return "INVALID_CONFIG";
    case Errc::kInvalidArgument: return "INVALID_ARGUMENT";
    case Errc::kBackendUnavailable: return "BACKEND_UNAVAILABLE";
    case Errc::kNoCandidates: return "NO_CANDIDATES";
    case Errc::kMalformedResponse: return "MALFORMED_RESPONSE";
    case Errc::kInfillFailed: return "INFILL_FAILED";
    case Errc::kRangeOutOfBounds: return "RANGE_OUT_OF_BOUNDS";
    case Errc::kInvalidRecord: return "INVALID_RECORD";
    case Errc::kIoError: return "IO_ERROR";
    case Errc::kPoolExhausted: return "POOL_EXHAUSTED";
    case Errc::kUnknownSession: return "UNKNOWN_SESSION";
    case Errc::kSessionNotActive: return "SESSION_NOT_ACTIVE";
    case Errc::kUnknownRequest: return "UNKNOWN_REQUEST";
    case Errc::kAlreadyDecided: return "ALREADY_DECIDED";
    case Errc::kBadIndex: return "BAD_INDEX";
    case Errc::kTooShort: return "TOO_SHORT";
    case Errc::kTooFewRequests: return "TOO_FEW_REQUESTS";
    case Errc::kSurveyOutOfRange: return "SURVEY_OUT_OF_RANGE";
    case Errc::kNotSubmitted: return "NOT_SUBMITTED";
    case Errc::kAlreadySurveyed: return "ALREADY_SURVEYED";
    case Errc::kCorruptLog: return "CORRUPT_LOG";
    case Errc::kInsufficientBase: return "INSUFFICIENT_BASE";
    case Errc::kEmptySuggestion: return "EMPTY_SUGGESTION";
    case Errc::kMissingSurvey: return "MISSING_SURVEY";
    case Errc::kMalformedRecord: return "MALFORMED_RECORD";
  }
  return "UNKNOWN";
}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace milrw
