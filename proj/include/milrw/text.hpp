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
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Canonical tokenization shared by diffs, filters and every metric:
// lowercase, split on whitespace, strip leading/trailing punctuation.

namespace milrw {

struct CharRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool operator==(const CharRange&) const = default;
};

// A whitespace-delimited word of the raw text with its canonical key.
// The key may be empty for words made only of punctuation.
struct Word {
  std::string key;
  CharRange range;
};

bool is_space(char c);
std::string_view trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

// Lowercased word with leading/trailing ASCII punctuation removed.
std::string canonical_form(std::string_view word);

std::vector<Word> split_words(std::string_view text);

// Non-empty canonical tokens in order.
std::vector<std::string> canonical_tokens(std::string_view text);

// Number of UTF-8 code points. Lengths reported to users (caption gates,
// revision lengths) are code points; offsets everywhere are bytes.
std::size_t utf8_length(std::string_view text);

std::string join(std::span<const std::string> parts, std::string_view sep);

// Length of the longest common subsequence of two token sequences,
// computed with the bit-parallel row recurrence (one machine word per 64
// tokens of `b`).
std::size_t lcs_length(std::span<const std::string> a,
                       std::span<const std::string> b);

class StopWords {
 public:
  StopWords() = default;
  explicit StopWords(std::set<std::string, std::less<>> words)
      : words_(std::move(words)) {}

  // The list compiled in from data/stopwords.txt.
  static const StopWords& builtin();
  static StopWords parse(std::string_view text);
  static StopWords from_file(const std::filesystem::path& path);

  bool contains(std::string_view token) const {
    return words_.find(token) != words_.end();
  }
  std::size_t size() const { return words_.size(); }

  // Content token: canonical, not a stop word, at least 2 bytes long.
  bool is_content(std::string_view token) const;
  std::vector<std::string> content_tokens(std::string_view text) const;

 private:
  std::set<std::string, std::less<>> words_;
};

}  // namespace milrw
