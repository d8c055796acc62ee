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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "milrw/markup.hpp"

namespace milrw {

struct GenerationConfig {
  std::size_t k = 10;         // top-k cutoff
  std::size_t n_display = 3;  // suggestions shown per request
  std::uint64_t seed = 0;
  double temperature = 1.0;

  // Throws kInvalidConfig unless 1 <= n_display <= k and temperature > 0.
  void validate() const;
  bool operator==(const GenerationConfig&) const = default;
};

// A full target sentence with an unnormalized, backend-defined log-score.
struct Candidate {
  std::string text;
  double score = 0.0;
};

struct SuggestionSet {
  std::string request_id;
  ModelInput model_input;
  std::vector<std::string> suggestions;
  std::string backend_id;
  GenerationConfig config;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  virtual std::string id() const = 0;

  // Throws kBackendUnavailable or kMalformedResponse.
  virtual std::vector<Candidate> candidates(const ModelInput& input,
                                            std::size_t max_candidates) = 0;
};

// Candidate pool requested from a backend per request, as a multiple of k,
// so the top-k restriction has something to cut.
inline constexpr std::size_t kCandidatePoolFactor = 3;

// Merges duplicate texts (max score, first position), orders by score
// descending with ties kept in backend order, and keeps the first k.
std::vector<Candidate> top_k_pool(std::vector<Candidate> candidates, std::size_t k);

// Draws up to n distinct indices without replacement, each draw
// proportional to exp(score / temperature) over the remaining items.
std::vector<std::size_t> sample_without_replacement(std::span<const double> scores,
                                                    double temperature,
                                                    std::size_t n,
                                                    std::uint64_t seed);

// Top-k sampling of the suggestion set shown to the user. The RNG is
// seeded from (cfg.seed, request_id), so calls share no mutable state.
// Throws kNoCandidates when the backend returns nothing.
SuggestionSet request_suggestions(const ModelInput& input,
                                  const GenerationConfig& cfg,
                                  GenerationBackend& backend,
                                  std::string request_id);

// Descriptive-substitution lexicon: UTF-8 lines "headword<TAB>replacement".
// Plain headwords are substitutions for a word or whole phrase. Blank
// insertions are keyed on the neighbouring tokens of the blank:
//   "left_right"  both neighbours,
//   "left_"       token before the blank,
//   "_right"      token after the blank,
// where "^" and "$" stand for the start and end of the sentence.
class Lexicon {
 public:
  static const Lexicon& builtin();
  static Lexicon parse(std::string_view tsv);
  static Lexicon from_file(const std::filesystem::path& path);

  std::span<const std::string> lookup(std::string_view headword) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

enum class StubMode {
  kRewrite,     // rewrite spans get descriptive substitutions
  kInfillOnly,  // every span is masked and infilled, like a plain infiller
};

// Deterministic candidate generator used as the bundled backend and as the
// infiller for corpus synthesis. Same (input, seed, lexicon) gives a
// byte-identical list. Throws kNoMarkers/kUnbalancedMarkers on bad input.
std::vector<Candidate> stub_suggest(const ModelInput& input, std::uint64_t seed,
                                    const Lexicon& lexicon = Lexicon::builtin(),
                                    std::size_t max_candidates = 32,
                                    StubMode mode = StubMode::kRewrite);

class StubBackend : public GenerationBackend {
 public:
  // A null lexicon selects the built-in one.
  explicit StubBackend(std::uint64_t seed, StubMode mode = StubMode::kRewrite,
                       std::shared_ptr<const Lexicon> lexicon = nullptr);

  std::string id() const override;
  std::vector<Candidate> candidates(const ModelInput& input,
                                    std::size_t max_candidates) override;

 private:
  std::uint64_t seed_;
  StubMode mode_;
  std::shared_ptr<const Lexicon> lexicon_;
};

// JSON-over-HTTP adapter for an external model server.
//   request:  {"input": <text>, "max_candidates": N}
//   response: {"candidates": [{"text": ..., "score": ...}, ...]}
class HttpBackend : public GenerationBackend {
 public:
  // url: "http://host[:port][/path]". Throws kInvalidConfig.
  HttpBackend(std::string url, std::chrono::milliseconds timeout,
              std::string identity = {});

  std::string id() const override { return identity_; }
  std::vector<Candidate> candidates(const ModelInput& input,
                                    std::size_t max_candidates) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::chrono::milliseconds timeout_;
  std::string identity_;
};

// Parses and validates an HTTP backend response body. Exposed for tests.
std::vector<Candidate> parse_backend_response(std::string_view body,
                                              std::size_t max_candidates);

}  // namespace milrw
