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

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "milrw/generation.hpp"
#include "milrw/text.hpp"

// Pseudo-parallel corpus synthesis: annotated creative spans are masked,
// infilled by a generic model, and the (generic, creative) pair becomes
// one rewrite example and one infill example.

namespace milrw {

enum class ExampleType { kRewrite, kInfill, kFeedbackAccept, kFeedbackReject };
enum class Split { kTrain, kValid, kTest, kUnsplit };

std::string_view to_string(ExampleType t);
std::string_view to_string(Split s);
ExampleType parse_example_type(std::string_view s);
Split parse_split(std::string_view s);

// Where a pair came from: a corpus record or a logged decision.
struct Provenance {
  std::string source_id;
  std::optional<std::size_t> record_index;
  std::string session_id;
  std::string request_id;
  std::optional<std::uint64_t> event_id;

  bool operator==(const Provenance&) const = default;
};

struct TrainingPair {
  std::string source;
  std::string target;
  ExampleType example_type = ExampleType::kRewrite;
  Provenance provenance;
  Split split = Split::kUnsplit;

  bool operator==(const TrainingPair&) const = default;
};

nlohmann::json to_json(const TrainingPair& pair);
TrainingPair training_pair_from_json(const nlohmann::json& j);
// One compact JSON object with sorted keys, no trailing newline.
std::string to_jsonl_line(const TrainingPair& pair);
// Throws kInvalidRecord with the line number set.
std::vector<TrainingPair> read_training_pairs(const std::filesystem::path& path);

struct AnnotatedSentence {
  std::string text;
  std::vector<CharRange> spans;  // byte ranges of creative devices
  std::string source_id;
  std::optional<std::string> device_label;

  // Throws kInvalidRecord unless spans are in bounds, non-empty, sorted
  // and non-overlapping.
  void validate() const;
};

// {"text": ..., "spans": [[b, e], ...], "source_id": ..., "device_label": ...}
AnnotatedSentence annotated_sentence_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnnotatedSentence& a);

// Thin adapters from common annotation layouts to AnnotatedSentence.
// "sentence<TAB>word-index" (0-based whitespace token), one per line.
std::vector<AnnotatedSentence> convert_word_index_tsv(std::istream& in,
                                                      const std::string& source_id);
// Inline delimiters around annotated spans, e.g. "It was **like black onyx**."
std::vector<AnnotatedSentence> convert_inline_markup(std::istream& in,
                                                     const std::string& source_id,
                                                     std::string_view open = "**",
                                                     std::string_view close = "**");

struct SynthesizedSource {
  std::string generic;
  std::vector<CharRange> replaced_ranges;  // into `generic`
  std::vector<std::string> original_spans;
  std::vector<std::string> infilled_spans;
};

// Masks every annotated span, asks the infiller for its top-scored
// completion and recovers one fill per mask. Throws kInfillFailed when the
// completion does not line up with the masked template or a fill is empty.
SynthesizedSource synthesize_source(const AnnotatedSentence& sentence,
                                    GenerationBackend& infiller);

// [rewrite, infill] examples; both targets are `creative` verbatim.
// Throws kRangeOutOfBounds for empty, unsorted or out-of-bounds ranges.
std::array<TrainingPair, 2> make_training_examples(std::string_view generic,
                                                   std::string_view creative,
                                                   std::span<const CharRange> replaced_ranges,
                                                   const Provenance& provenance = {});

struct DriftFilterConfig {
  bool enabled = true;
  // Drop only when the infill shares at most this many content tokens with
  // the original span...
  std::size_t max_shared_content_tokens = 0;
  // ...and introduces at least this many content tokens that do not occur
  // in the creative sentence.
  std::size_t min_novel_content_tokens = 1;
};

struct FilterVerdict {
  bool keep = true;
  std::string reason;  // empty when kept
};

inline constexpr std::string_view kDropContentDrift = "content-drift";

FilterVerdict drift_filter(const TrainingPair& pair, std::string_view original_span,
                           std::string_view infilled_span,
                           const StopWords& stop_words = StopWords::builtin(),
                           const DriftFilterConfig& config = {});

struct SplitRatios {
  double train = 42000.0 / 45626.0;
  double valid = 2000.0 / 45626.0;
  double test = 1626.0 / 45626.0;

  void validate() const;
};

struct CorpusOptions {
  SplitRatios ratios;
  std::uint64_t seed = 0;
  DriftFilterConfig filter;
  const StopWords* stop_words = &StopWords::builtin();
};

struct RecordError {
  std::string input;
  std::size_t line = 0;
  std::string code;
  std::string message;
};

struct CorpusManifest {
  std::map<std::string, std::size_t> counts;  // per split name
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::string infiller;
  std::size_t records_read = 0;
  std::size_t sentences_processed = 0;
  std::size_t pairs_pre_filter = 0;
  std::size_t pairs_kept = 0;
  std::size_t pairs_dropped = 0;
  std::map<std::string, std::size_t> drop_reasons;
  std::vector<RecordError> record_errors;
  DriftFilterConfig filter;

  nlohmann::json to_json() const;
};

struct CorpusBuild {
  std::vector<TrainingPair> pairs;  // kept pairs, in split-then-shuffle order
  CorpusManifest manifest;
};

// Runs synthesize -> make examples -> filter over every record, then
// shuffles sentence groups with the seed and splits by ratio (both pairs of
// a sentence land in the same split). Unreadable inputs are fatal
// (kIoError); bad records are skipped and listed in the manifest.
CorpusBuild build_corpus(std::span<const std::filesystem::path> inputs,
                         GenerationBackend& infiller, const CorpusOptions& options);

// Writes train.jsonl, valid.jsonl, test.jsonl and manifest.json.
void write_corpus(const CorpusBuild& build, const std::filesystem::path& out_dir);

// Reference figures for downstream fine-tuning, recorded in manifests as
// documentation only.
nlohmann::json reference_corpus_metadata();

}  // namespace milrw
