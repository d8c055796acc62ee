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

#include "milrw/markup.hpp"

#include <algorithm>
#include <cstdint>

#include "milrw/error.hpp"

namespace milrw {
namespace {

bool contains_reserved_marker(std::string_view text) {
  return text.find(kReplaceOpen) != std::string_view::npos ||
         text.find(kReplaceClose) != std::string_view::npos ||
         text.find(kMask) != std::string_view::npos;
}

std::string at(std::size_t pos) { return " at offset " + std::to_string(pos); }

template <typename RenderRewrite, typename RenderInfill>
std::string render_with(const DemarcatedDraft& draft, RenderRewrite rewrite,
                        RenderInfill infill) {
  const std::string& plain = draft.plain_text();
  std::string out;
  out.reserve(plain.size() + 16 * draft.spans().size());
  std::size_t cursor = 0;
  for (const auto& span : draft.spans()) {
    out.append(plain, cursor, span.start - cursor);
    if (span.kind == SpanKind::kRewrite) {
      rewrite(out, span.inner);
      cursor = span.end;
    } else {
      infill(out);
      cursor = span.start;
    }
  }
  out.append(plain, cursor, std::string::npos);
  return out;
}

}  // namespace

std::size_t DemarcatedDraft::rewrite_count() const {
  return static_cast<std::size_t>(std::count_if(
      spans_.begin(), spans_.end(),
      [](const Demarcation& d) { return d.kind == SpanKind::kRewrite; }));
}

std::size_t DemarcatedDraft::infill_count() const {
  return spans_.size() - rewrite_count();
}

DemarcatedDraft DemarcatedDraft::make(std::string plain_text,
                                      std::vector<Demarcation> spans) {
  std::size_t prev_end = 0;
  const Demarcation* prev = nullptr;
  for (const auto& s : spans) {
    if (s.end > plain_text.size() || s.start > s.end) {
      fail(Errc::kInvalidDraft, "span out of bounds" + at(s.start));
    }
    if (s.start < prev_end) {
      fail(Errc::kInvalidDraft, "spans overlap or are unsorted" + at(s.start));
    }
    if (s.kind == SpanKind::kRewrite) {
      if (s.end == s.start) {
        fail(Errc::kInvalidDraft, "empty rewrite span" + at(s.start));
      }
      if (plain_text.compare(s.start, s.end - s.start, s.inner) != 0) {
        fail(Errc::kInvalidDraft, "rewrite inner text does not match" + at(s.start));
      }
    } else {
      if (s.end != s.start || !s.inner.empty()) {
        fail(Errc::kInvalidDraft, "infill must be an empty point" + at(s.start));
      }
      if (prev && prev->kind == SpanKind::kInfill && prev->start == s.start) {
        fail(Errc::kInvalidDraft, "two blanks at one point" + at(s.start));
      }
    }
    prev_end = s.end;
    prev = &s;
  }

  DemarcatedDraft draft;
  draft.plain_text_ = std::move(plain_text);
  draft.spans_ = std::move(spans);
  draft.raw_text_ = render_markup(draft);
  // Text that would parse differently (stray brackets, blank-like
  // underscore runs, untrimmed rewrite edges) is not a valid draft.
  if (parse_markup(draft.raw_text_) != draft) {
    fail(Errc::kInvalidDraft, "draft has no canonical markup form");
  }
  return draft;
}

DemarcatedDraft parse_markup(std::string_view raw) {
  if (contains_reserved_marker(raw)) {
    fail(Errc::kReservedMarker, "draft contains a reserved model marker");
  }

  DemarcatedDraft draft;
  draft.raw_text_ = std::string(raw);
  std::string& plain = draft.plain_text_;
  plain.reserve(raw.size());

  std::size_t i = 0;
  while (i < raw.size()) {
    const char c = raw[i];
    if (c == '[') {
      const std::size_t close = raw.find_first_of("[]", i + 1);
      if (close == std::string_view::npos) {
        fail(Errc::kUnbalancedBrackets, "unmatched '['" + at(i));
      }
      if (raw[close] == '[') {
        fail(Errc::kNestedBrackets, "nested '['" + at(close));
      }
      const std::string_view inner = trim(raw.substr(i + 1, close - i - 1));
      if (inner.empty()) {
        fail(Errc::kEmptyRewriteSpan, "empty rewrite span" + at(i));
      }
      const std::size_t start = plain.size();
      plain.append(inner);
      draft.spans_.push_back(
          {SpanKind::kRewrite, start, plain.size(), std::string(inner)});
      i = close + 1;
    } else if (c == ']') {
      fail(Errc::kUnbalancedBrackets, "unmatched ']'" + at(i));
    } else if (c == '_') {
      std::size_t run = 0;
      while (i + run < raw.size() && raw[i + run] == '_') ++run;
      if (run >= kMinBlankRun) {
        draft.spans_.push_back({SpanKind::kInfill, plain.size(), plain.size(), {}});
      } else {
        plain.append(run, '_');
      }
      i += run;
    } else {
      plain.push_back(c);
      ++i;
    }
  }
  return draft;
}

std::string render_markup(const DemarcatedDraft& draft) {
  return render_with(
      draft,
      [](std::string& out, const std::string& inner) {
        out += "[ ";
        out += inner;
        out += " ]";
      },
      [](std::string& out) { out.append(kMinBlankRun, '_'); });
}

ModelInput to_model_input(const DemarcatedDraft& draft) {
  if (draft.spans().empty()) {
    fail(Errc::kNoDemarcations,
         "draft has no [ ] span or ___ blank to work on");
  }
  std::string text = render_with(
      draft,
      [](std::string& out, const std::string& inner) {
        out += kReplaceOpen;
        out += ' ';
        out += inner;
        out += ' ';
        out += kReplaceClose;
      },
      [](std::string& out) { out += kMask; });
  return {std::move(text), draft};
}

std::vector<ModelInputPiece> parse_model_input(std::string_view text) {
  using Kind = ModelInputPiece::Kind;
  std::vector<ModelInputPiece> pieces;
  std::string literal;
  bool any_marker = false;

  auto flush = [&] {
    if (!literal.empty()) {
      pieces.push_back({Kind::kText, std::move(literal)});
      literal.clear();
    }
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const std::string_view rest = text.substr(i);
    if (rest.starts_with(kMask)) {
      flush();
      pieces.push_back({Kind::kMask, {}});
      any_marker = true;
      i += kMask.size();
    } else if (rest.starts_with(kReplaceOpen)) {
      const std::size_t body = i + kReplaceOpen.size();
      const std::size_t close = text.find(kReplaceClose, body);
      if (close == std::string_view::npos) {
        fail(Errc::kUnbalancedMarkers, "unterminated <replace>" + at(i));
      }
      const std::string_view inner = text.substr(body, close - body);
      if (contains_reserved_marker(inner)) {
        fail(Errc::kUnbalancedMarkers, "marker inside <replace> region" + at(i));
      }
      if (trim(inner).empty()) {
        fail(Errc::kUnbalancedMarkers, "empty <replace> region" + at(i));
      }
      flush();
      pieces.push_back({Kind::kReplace, std::string(trim(inner))});
      any_marker = true;
      i = close + kReplaceClose.size();
    } else if (rest.starts_with(kReplaceClose)) {
      fail(Errc::kUnbalancedMarkers, "unmatched </replace>" + at(i));
    } else {
      literal.push_back(text[i]);
      ++i;
    }
  }
  flush();
  if (!any_marker) fail(Errc::kNoMarkers, "model input has no markers");
  return pieces;
}

RevisionDiff extract_revision(std::string_view source, std::string_view target) {
  RevisionDiff diff;
  if (source == target) return diff;

  const auto sw = split_words(source);
  const auto tw = split_words(target);
  const std::size_t n = sw.size();
  const std::size_t m = tw.size();

  // Suffix LCS table over canonical keys.
  std::vector<std::uint32_t> table((n + 1) * (m + 1), 0);
  auto cell = [&](std::size_t i, std::size_t j) -> std::uint32_t& {
    return table[i * (m + 1) + j];
  };
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      cell(i, j) = sw[i].key == tw[j].key
                       ? cell(i + 1, j + 1) + 1
                       : std::max(cell(i + 1, j), cell(i, j + 1));
    }
  }

  struct Anchor {
    CharRange source;
    CharRange target;
  };
  std::vector<Anchor> anchors;
  for (std::size_t i = 0, j = 0; i < n && j < m;) {
    if (sw[i].key == tw[j].key) {
      const auto& sr = sw[i].range;
      const auto& tr = tw[j].range;
      // Keys can agree while bytes differ (case, punctuation); such words
      // stay inside a segment so reassembly is exact.
      if (source.substr(sr.begin, sr.size()) == target.substr(tr.begin, tr.size())) {
        anchors.push_back({sr, tr});
      }
      ++i;
      ++j;
    } else if (cell(i + 1, j) >= cell(i, j + 1)) {
      ++i;
    } else {
      ++j;
    }
  }
  anchors.push_back({{source.size(), source.size()}, {target.size(), target.size()}});

  std::size_t prev_s = 0;
  std::size_t prev_t = 0;
  for (const auto& anchor : anchors) {
    std::string_view s = source.substr(prev_s, anchor.source.begin - prev_s);
    std::string_view t = target.substr(prev_t, anchor.target.begin - prev_t);
    if (s != t) {
      std::size_t lead = 0;
      while (lead < s.size() && lead < t.size() && s[lead] == t[lead] &&
             is_space(s[lead])) {
        ++lead;
      }
      std::size_t tail = 0;
      while (tail < s.size() - lead && tail < t.size() - lead &&
             s[s.size() - 1 - tail] == t[t.size() - 1 - tail] &&
             is_space(s[s.size() - 1 - tail])) {
        ++tail;
      }
      DiffSegment seg;
      seg.source_range = {prev_s + lead, prev_s + s.size() - tail};
      seg.target_range = {prev_t + lead, prev_t + t.size() - tail};
      seg.source_text = std::string(s.substr(lead, s.size() - lead - tail));
      seg.target_text = std::string(t.substr(lead, t.size() - lead - tail));
      diff.chars_introduced += utf8_length(trim(seg.target_text));
      diff.segments.push_back(std::move(seg));
    }
    prev_s = anchor.source.end;
    prev_t = anchor.target.end;
  }
  return diff;
}

std::string apply_revision(std::string_view source, const RevisionDiff& diff) {
  std::string out;
  std::size_t cursor = 0;
  for (const auto& seg : diff.segments) {
    out.append(source.substr(cursor, seg.source_range.begin - cursor));
    out += seg.target_text;
    cursor = seg.source_range.end;
  }
  out.append(source.substr(cursor));
  return out;
}

}  // namespace milrw
