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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "milrw/text.hpp"

// User-facing demarcation markup:
//   [ some words ]   rewrite the bracketed span
//   ___              infill at this point (a maximal run of >= 3 underscores)
// and its model-facing serialization with <replace>/</replace>/<mask>.

namespace milrw {

inline constexpr std::string_view kReplaceOpen = "<replace>";
inline constexpr std::string_view kReplaceClose = "</replace>";
inline constexpr std::string_view kMask = "<mask>";
inline constexpr std::size_t kMinBlankRun = 3;

enum class SpanKind { kRewrite, kInfill };

struct Demarcation {
  SpanKind kind = SpanKind::kRewrite;
  std::size_t start = 0;  // byte offset into plain_text
  std::size_t end = 0;    // == start for infill points
  std::string inner;      // bracketed text, empty for infills

  bool operator==(const Demarcation&) const = default;
};

class DemarcatedDraft {
 public:
  DemarcatedDraft() = default;

  // Builds a draft from plain text and spans, checking every invariant
  // (sorted, non-overlapping, in bounds, inner text matches). raw_text is
  // set to the canonical rendering.
  static DemarcatedDraft make(std::string plain_text,
                              std::vector<Demarcation> spans);

  const std::string& plain_text() const { return plain_text_; }
  const std::vector<Demarcation>& spans() const { return spans_; }
  const std::string& raw_text() const { return raw_text_; }

  std::size_t rewrite_count() const;
  std::size_t infill_count() const;

  // Equality ignores raw_text: "[wave]" and "[ wave ]" are the same draft.
  bool operator==(const DemarcatedDraft& other) const {
    return plain_text_ == other.plain_text_ && spans_ == other.spans_;
  }

 private:
  friend DemarcatedDraft parse_markup(std::string_view raw);

  std::string plain_text_;
  std::vector<Demarcation> spans_;
  std::string raw_text_;
};

// Throws Error with kUnbalancedBrackets, kNestedBrackets, kEmptyRewriteSpan
// or kReservedMarker.
DemarcatedDraft parse_markup(std::string_view raw);

// Canonical markup: "[ inner ]" for rewrites, "___" for blanks.
std::string render_markup(const DemarcatedDraft& draft);

struct ModelInput {
  std::string text;
  DemarcatedDraft origin;
};

// Throws kNoDemarcations for a draft without spans.
ModelInput to_model_input(const DemarcatedDraft& draft);

// A model-input string split into literal text and marker regions.
struct ModelInputPiece {
  enum class Kind { kText, kReplace, kMask };
  Kind kind = Kind::kText;
  std::string text;  // literal text, or the trimmed inner text of a replace
};

// Throws kUnbalancedMarkers or kNoMarkers.
std::vector<ModelInputPiece> parse_model_input(std::string_view text);

struct DiffSegment {
  CharRange source_range;
  CharRange target_range;
  std::string source_text;
  std::string target_text;
};

struct RevisionDiff {
  std::vector<DiffSegment> segments;
  std::size_t chars_introduced = 0;
};

// Token-level LCS diff (canonical tokens) mapped back to byte ranges.
// Substituting each segment's target_text for its source_range in
// `source` reproduces `target` exactly. Pure insertions and deletions keep
// one separating space inside the segment text; chars_introduced counts
// the code points of the trimmed target-only text.
RevisionDiff extract_revision(std::string_view source, std::string_view target);

// Applies diff segments to `source` (used to check soundness).
std::string apply_revision(std::string_view source, const RevisionDiff& diff);

}  // namespace milrw
