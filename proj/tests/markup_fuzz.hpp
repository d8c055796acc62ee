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

// Random markup drafts with independently tracked expectations.

#include <random>
#include <string>
#include <vector>

#include "milrw/error.hpp"
#include "milrw/markup.hpp"

namespace milrw::testing {

struct GeneratedDraft {
  std::string raw;
  std::string plain;
  std::vector<Demarcation> spans;
  std::vector<std::size_t> gaps;         // raw offsets inside separators
  std::vector<std::size_t> rewrite_opens;  // raw offsets just after '['
};

inline const std::vector<std::string>& fuzz_vocab() {
  static const std::vector<std::string> v = {
      "the", "sky", "wave,", "crashes.", "Old", "tree", "café", "naïve", "snake_case", "a__b",
      "light", "(quiet)", "rain!", "über", "x", "7", "fox's", "\xe2\x80\x94", "glow", "sea-foam", "日本"};
  return v;
}

inline GeneratedDraft random_valid_markup(std::mt19937_64& rng) {
  const auto& vocab = fuzz_vocab();
  std::uniform_int_distribution<int> pieces(1, 12);
  std::uniform_int_distribution<int> kind(0, 9);
  std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
  std::uniform_int_distribution<int> small(0, 2);
  const char* seps[] = {" ", "  ", "\t", "\n", " "};
  std::uniform_int_distribution<int> sep_pick(0, 4);

  GeneratedDraft d;
  const int n = pieces(rng);
  for (int p = 0; p < n; ++p) {
    if (p > 0) {
      d.gaps.push_back(d.raw.size());
      const std::string s = seps[sep_pick(rng)];
      d.raw += s;
      d.plain += s;
    }
    const int k = kind(rng);
    if (k <= 5) {
      const auto& w = vocab[word(rng)];
      d.raw += w;
      d.plain += w;
    } else if (k <= 7) {
      std::string inner;
      const int words = 1 + small(rng) + small(rng);
      for (int i = 0; i < words; ++i) {
        if (i) inner += i % 2 ? " " : "  ";
        inner += vocab[word(rng)];
      }
      d.raw += "[";
      d.rewrite_opens.push_back(d.raw.size());
      d.raw += std::string(static_cast<std::size_t>(small(rng)), ' ') + inner +
               std::string(static_cast<std::size_t>(small(rng)), ' ') + "]";
      const std::size_t start = d.plain.size();
      d.plain += inner;
      d.spans.push_back({SpanKind::kRewrite, start, d.plain.size(), inner});
    } else {
      d.raw += std::string(3 + static_cast<std::size_t>(small(rng) + small(rng)), '_');
      d.spans.push_back({SpanKind::kInfill, d.plain.size(), d.plain.size(), {}});
    }
  }
  d.gaps.push_back(d.raw.size());
  return d;
}

struct MalformedDraft {
  std::string raw;
  Errc expected;
};

inline MalformedDraft random_malformed_markup(std::mt19937_64& rng) {
  auto d = random_valid_markup(rng);
  std::uniform_int_distribution<int> cls(0, 4);
  auto pick_gap = [&] {
    std::uniform_int_distribution<std::size_t> g(0, d.gaps.size() - 1);
    return d.gaps[g(rng)];
  };
  switch (cls(rng)) {
    case 0: {
      if (d.rewrite_opens.empty()) {
        d.raw += " [ tail ]";
        d.rewrite_opens.push_back(d.raw.size() - 7);
      }
      std::uniform_int_distribution<std::size_t> r(0, d.rewrite_opens.size() - 1);
      d.raw.insert(d.rewrite_opens[r(rng)], "[inner]");
      return {d.raw, Errc::kNestedBrackets};
    }
    case 1:
      return {d.raw + " [ never closed", Errc::kUnbalancedBrackets};
    case 2:
      d.raw.insert(pick_gap(), " ] ");
      return {d.raw, Errc::kUnbalancedBrackets};
    case 3: {
      std::uniform_int_distribution<int> sp(0, 3);
      d.raw.insert(pick_gap(), " [" + std::string(static_cast<std::size_t>(sp(rng)), ' ') + "] ");
      return {d.raw, Errc::kEmptyRewriteSpan};
    }
    default: {
      const char* markers[] = {"<mask>", "<replace>", "</replace>"};
      std::uniform_int_distribution<int> m(0, 2);
      d.raw.insert(pick_gap(), markers[m(rng)]);
      return {d.raw, Errc::kReservedMarker};
    }
  }
}

}  // namespace milrw::testing
