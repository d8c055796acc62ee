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

#include "milrw/generation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "milrw/error.hpp"
#include "milrw/rng.hpp"
#include "resources.hpp"

namespace milrw {

void GenerationConfig::validate() const {
  if (k < 1) fail(Errc::kInvalidConfig, "k must be >= 1");
  if (n_display < 1 || n_display > k) {
    fail(Errc::kInvalidConfig, "n_display must be in [1, k]");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(Errc::kInvalidConfig, "temperature must be a positive finite number");
  }
}

std::vector<Candidate> top_k_pool(std::vector<Candidate> candidates, std::size_t k) {
  std::vector<Candidate> merged;
  std::unordered_map<std::string, std::size_t> seen;
  for (auto& c : candidates) {
    auto [it, inserted] = seen.emplace(c.text, merged.size());
    if (inserted) {
      merged.push_back(std::move(c));
    } else {
      merged[it->second].score = std::max(merged[it->second].score, c.score);
    }
  }
  std::stable_sort(merged.begin(), merged.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  if (merged.size() > k) merged.resize(k);
  return merged;
}

std::vector<std::size_t> sample_without_replacement(std::span<const double> scores,
                                                    double temperature,
                                                    std::size_t n,
                                                    std::uint64_t seed) {
  std::vector<std::size_t> picked;
  if (scores.empty()) return picked;
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> weights(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    weights[i] = std::exp((scores[i] - top) / temperature);
  }
  std::vector<bool> taken(scores.size(), false);
  Rng rng(seed);
  while (picked.size() < n && picked.size() < scores.size()) {
    double total = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!taken[i]) {
        total += weights[i];
        last = i;
      }
    }
    const double u = rng.uniform01() * total;
    double cumulative = 0.0;
    std::size_t choice = last;  // guards against rounding at the top end
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (taken[i]) continue;
      cumulative += weights[i];
      if (u < cumulative) {
        choice = i;
        break;
      }
    }
    taken[choice] = true;
    picked.push_back(choice);
  }
  return picked;
}

SuggestionSet request_suggestions(const ModelInput& input,
                                  const GenerationConfig& cfg,
                                  GenerationBackend& backend,
                                  std::string request_id) {
  cfg.validate();
  auto raw = backend.candidates(input, cfg.k * kCandidatePoolFactor);
  if (raw.empty()) fail(Errc::kNoCandidates, "backend returned no candidates");
  for (const auto& c : raw) {
    if (c.text.empty() || !std::isfinite(c.score)) {
      fail(Errc::kMalformedResponse, "candidate with empty text or non-finite score");
    }
  }
  const auto pool = top_k_pool(std::move(raw), cfg.k);
  std::vector<double> scores;
  scores.reserve(pool.size());
  for (const auto& c : pool) scores.push_back(c.score);

  SuggestionSet set;
  set.request_id = std::move(request_id);
  set.model_input = input;
  set.backend_id = backend.id();
  set.config = cfg;
  for (std::size_t i : sample_without_replacement(scores, cfg.temperature, cfg.n_display,
                                                  derive_seed(cfg.seed, set.request_id))) {
    set.suggestions.push_back(pool[i].text);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Lexicon

const Lexicon& Lexicon::builtin() {
  static const Lexicon lexicon = parse(resources::kLexicon);
  return lexicon;
}

Lexicon Lexicon::parse(std::string_view tsv) {
  Lexicon lex;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      Error err(Errc::kInvalidRecord,
                "lexicon line " + std::to_string(line_no) + " has no TAB");
      err.line = line_no;
      throw err;
    }
    std::string head = to_lower_ascii(trim(std::string_view(line).substr(0, tab)));
    std::string repl(trim(std::string_view(line).substr(tab + 1)));
    if (head.empty() || repl.empty()) continue;
    auto& list = lex.entries_[head];
    if (std::find(list.begin(), list.end(), repl) == list.end()) {
      list.push_back(std::move(repl));
    }
  }
  return lex;
}

Lexicon Lexicon::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kIoError, "cannot read lexicon " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::span<const std::string> Lexicon::lookup(std::string_view headword) const {
  auto it = entries_.find(headword);
  if (it == entries_.end()) return {};
  return it->second;
}

// ---------------------------------------------------------------------------
// Stub backend

namespace {

constexpr std::array<std::string_view, 6> kEmbellishTemplates = {
    "vivid {}",
    "{} bathed in golden light",
    "{}, soft and luminous",
    "the quiet drama of {}",
    "{} like a half-remembered dream",
    "{} glowing in the fading light",
};

constexpr std::array<std::string_view, 8> kGenericFillers = {
    "quietly", "gently",   "slowly",   "softly",
    "endlessly", "beautifully", "silently", "brightly",
};

constexpr double kTierBoth = 3.0;
constexpr double kTierPhrase = 3.0;
constexpr double kTierSide = 2.0;
constexpr double kTierWord = 2.0;
constexpr double kTierGeneric = 0.0;
constexpr std::size_t kMaxCombinations = 512;

struct Option {
  std::string text;
  double tier = 0.0;
};

void add_option(std::vector<Option>& options, std::string text, double tier,
                std::string_view exclude = {}) {
  if (text.empty() || text == exclude) return;
  for (const auto& o : options) {
    if (o.text == text) return;
  }
  options.push_back({std::move(text), tier});
}

std::string fill_template(std::string_view tmpl, std::string_view value) {
  std::string out(tmpl);
  const auto pos = out.find("{}");
  out.replace(pos, 2, value);
  return out;
}

std::string last_token(std::string_view text) {
  const auto tokens = canonical_tokens(text);
  return tokens.empty() ? std::string("^") : tokens.back();
}

std::string first_token(std::string_view text) {
  const auto tokens = canonical_tokens(text);
  return tokens.empty() ? std::string("$") : tokens.front();
}

std::vector<Option> infill_options(const Lexicon& lex, const std::string& left,
                                   const std::string& right) {
  std::vector<Option> options;
  for (const auto& e : lex.lookup(left + "_" + right)) add_option(options, e, kTierBoth);
  for (const auto& e : lex.lookup(left + "_")) add_option(options, e, kTierSide);
  for (const auto& e : lex.lookup("_" + right)) add_option(options, e, kTierSide);
  for (auto f : kGenericFillers) add_option(options, std::string(f), kTierGeneric);
  return options;
}

std::vector<Option> rewrite_options(const Lexicon& lex, const std::string& inner) {
  std::vector<Option> options;
  const auto tokens = canonical_tokens(inner);
  for (const auto& e : lex.lookup(join(tokens, " "))) {
    add_option(options, e, kTierPhrase, inner);
  }
  for (const auto& word : split_words(inner)) {
    if (word.key.empty()) continue;
    auto subs = lex.lookup(word.key);
    if (subs.empty()) continue;
    // Replace only the word core so trailing punctuation survives.
    std::size_t b = word.range.begin;
    std::size_t e = word.range.end;
    while (b < e && std::ispunct(static_cast<unsigned char>(inner[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(inner[e - 1]))) --e;
    for (const auto& sub : subs) {
      std::string text = inner.substr(0, b) + sub + inner.substr(e);
      add_option(options, std::move(text), kTierWord, inner);
    }
  }
  for (auto t : kEmbellishTemplates) {
    add_option(options, fill_template(t, inner), kTierGeneric, inner);
  }
  return options;
}

}  // namespace

std::vector<Candidate> stub_suggest(const ModelInput& input, std::uint64_t seed,
                                    const Lexicon& lexicon, std::size_t max_candidates,
                                    StubMode mode) {
  using Kind = ModelInputPiece::Kind;
  const auto pieces = parse_model_input(input.text);

  std::vector<std::vector<Option>> regions;
  std::vector<std::size_t> region_piece;
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    const auto& piece = pieces[j];
    if (piece.kind == Kind::kText) continue;
    if (piece.kind == Kind::kReplace && mode == StubMode::kRewrite) {
      regions.push_back(rewrite_options(lexicon, piece.text));
    } else {
      const bool has_left = j > 0 && pieces[j - 1].kind == Kind::kText;
      const bool has_right = j + 1 < pieces.size() && pieces[j + 1].kind == Kind::kText;
      regions.push_back(infill_options(
          lexicon, has_left ? last_token(pieces[j - 1].text) : std::string("^"),
          has_right ? first_token(pieces[j + 1].text) : std::string("$")));
    }
    region_piece.push_back(j);
  }

  std::size_t combos = 1;
  for (const auto& r : regions) {
    combos = std::min(kMaxCombinations, combos * r.size());
  }

  std::vector<Candidate> out;
  std::unordered_map<std::string, bool> seen;
  std::vector<std::size_t> digits(regions.size(), 0);
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c;
    for (std::size_t r = 0; r < regions.size(); ++r) {
      digits[r] = rest % regions[r].size();
      rest /= regions[r].size();
    }
    std::string text;
    double tier = 0.0;
    std::size_t r = 0;
    for (std::size_t j = 0; j < pieces.size(); ++j) {
      if (r < region_piece.size() && region_piece[r] == j) {
        const auto& opt = regions[r][digits[r]];
        text += opt.text;
        tier += opt.tier;
        ++r;
      } else {
        text += pieces[j].text;
      }
    }
    if (!seen.emplace(text, true).second) continue;
    const double jitter = unit_interval(splitmix64(seed ^ fnv1a64(text)));
    out.push_back({std::move(text), tier + jitter});
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  if (out.size() > max_candidates) out.resize(max_candidates);
  return out;
}

StubBackend::StubBackend(std::uint64_t seed, StubMode mode,
                         std::shared_ptr<const Lexicon> lexicon)
    : seed_(seed), mode_(mode), lexicon_(std::move(lexicon)) {
  if (!lexicon_) {
    lexicon_ = std::shared_ptr<const Lexicon>(std::shared_ptr<void>(), &Lexicon::builtin());
  }
}

std::string StubBackend::id() const {
  return mode_ == StubMode::kRewrite ? "stub-rewrite" : "stub-infill";
}

std::vector<Candidate> StubBackend::candidates(const ModelInput& input,
                                               std::size_t max_candidates) {
  return stub_suggest(input, seed_, *lexicon_, max_candidates, mode_);
}

}  // namespace milrw
