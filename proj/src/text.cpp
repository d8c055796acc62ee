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

#include "milrw/text.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "milrw/error.hpp"
#include "resources.hpp"

namespace milrw {
namespace {

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

}  // namespace

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string_view trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return text.substr(b, e - b);
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string canonical_form(std::string_view word) {
  std::size_t b = 0;
  std::size_t e = word.size();
  while (b < e && is_ascii_punct(word[b])) ++b;
  while (e > b && is_ascii_punct(word[e - 1])) --e;
  return to_lower_ascii(word.substr(b, e - b));
}

std::vector<Word> split_words(std::string_view text) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    words.push_back({canonical_form(text.substr(start, i - start)), {start, i}});
  }
  return words;
}

std::vector<std::string> canonical_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  for (auto& w : split_words(text)) {
    if (!w.key.empty()) tokens.push_back(std::move(w.key));
  }
  return tokens;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::size_t lcs_length(std::span<const std::string> a,
                       std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  const std::size_t m = b.size();
  const std::size_t words = (m + 63) / 64;

  // Match masks: bit j of masks[t] is set when b[j] == token t.
  std::unordered_map<std::string_view, std::vector<std::uint64_t>> masks;
  for (std::size_t j = 0; j < m; ++j) {
    auto& mask = masks[b[j]];
    if (mask.empty()) mask.assign(words, 0);
    mask[j / 64] |= std::uint64_t{1} << (j % 64);
  }

  std::vector<std::uint64_t> v(words, ~std::uint64_t{0});
  for (const auto& token : a) {
    auto it = masks.find(token);
    if (it == masks.end()) continue;  // V & M == 0 leaves V unchanged
    const auto& mask = it->second;
    std::uint64_t carry = 0;
    for (std::size_t w = 0; w < words; ++w) {
      const std::uint64_t x = v[w];
      const std::uint64_t u = x & mask[w];
      const std::uint64_t s = x + u;
      const std::uint64_t c1 = s < x ? 1 : 0;
      const std::uint64_t s2 = s + carry;
      const std::uint64_t c2 = s2 < s ? 1 : 0;
      carry = c1 | c2;
      v[w] = s2 | (x & ~mask[w]);
    }
  }

  std::size_t ones = 0;
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t bits = v[w];
    const std::size_t valid = std::min<std::size_t>(64, m - w * 64);
    if (valid < 64) bits &= (std::uint64_t{1} << valid) - 1;
    ones += static_cast<std::size_t>(std::popcount(bits));
  }
  return m - ones;
}

const StopWords& StopWords::builtin() {
  static const StopWords words = parse(resources::kStopWords);
  return words;
}

StopWords StopWords::parse(std::string_view text) {
  std::set<std::string, std::less<>> words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    words.insert(canonical_form(t));
  }
  return StopWords(std::move(words));
}

StopWords StopWords::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kIoError, "cannot read stop-word list " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool StopWords::is_content(std::string_view token) const {
  return token.size() >= 2 && !contains(token);
}

std::vector<std::string> StopWords::content_tokens(std::string_view text) const {
  std::vector<std::string> out;
  for (auto& t : canonical_tokens(text)) {
    if (is_content(t)) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace milrw
