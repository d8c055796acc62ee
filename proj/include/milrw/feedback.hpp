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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "milrw/corpus.hpp"
#include "milrw/session.hpp"

// Turns logged accept/reject decisions into fine-tuning pairs whose target
// is always the preferred text, and mixes them with base-corpus samples.

namespace milrw {

struct FeedbackOptions {
  // Non-chosen siblings of an accepted suggestion also become reject pairs.
  bool siblings_as_rejects = false;
  // A reject yields one pair per displayed suggestion instead of the first.
  bool reject_all_shown = false;
  bool include_closed = false;
};

// Pairs are ordered by (session_id, decision event_id).
std::vector<TrainingPair> extract_pairs(const SessionMap& sessions,
                                        const FeedbackOptions& options = {});
std::vector<TrainingPair> extract_pairs(std::span<const InteractionEvent> events,
                                        const FeedbackOptions& options = {});
// Throws kCorruptLog.
std::vector<TrainingPair> extract_pairs_from_log(std::string_view log_text,
                                                 const FeedbackOptions& options = {});

struct FeedbackDataset {
  std::vector<TrainingPair> pairs;
  std::vector<TrainingPair> mixed_original;
  std::uint64_t seed = 0;
  double ratio = 0.0;

  nlohmann::json manifest() const;
  // Feedback pairs first, then the sampled originals, one JSON per line.
  std::string to_jsonl() const;
};

// Samples floor(ratio * |pairs|) base pairs without replacement. Only the
// train split is eligible unless no base pair carries a split. Throws
// kInvalidArgument for a non-positive ratio and kInsufficientBase.
FeedbackDataset mix_with_original(std::vector<TrainingPair> pairs,
                                  std::span<const TrainingPair> base, double ratio,
                                  std::uint64_t seed);
FeedbackDataset mix_with_count(std::vector<TrainingPair> pairs,
                               std::span<const TrainingPair> base, std::size_t count,
                               std::uint64_t seed);

// Writes feedback.jsonl and manifest.json.
void write_feedback(const FeedbackDataset& dataset, const std::filesystem::path& out_dir);

nlohmann::json reference_feedback_recipe();

}  // namespace milrw
