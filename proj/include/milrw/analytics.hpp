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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "milrw/markup.hpp"
#include "milrw/session.hpp"

namespace milrw {

// ---- Rouge-L ---------------------------------------------------------------

enum class RougeNormalization {
  kSuggestion,  // share of the suggestion retained in the caption (default)
  kCaption,
};

// LCS over canonical tokens divided by the chosen length. Throws
// kEmptySuggestion when that length is zero.
double rouge_l_recall(std::span<const std::string> suggestion_tokens,
                      std::span<const std::string> caption_tokens,
                      RougeNormalization norm = RougeNormalization::kSuggestion);
double rouge_l_recall(std::string_view suggestion, std::string_view caption,
                      RougeNormalization norm = RougeNormalization::kSuggestion);

// ---- counting --------------------------------------------------------------

struct AcceptanceStats {
  std::size_t n_requests = 0;
  std::size_t n_accepted = 0;
  std::optional<double> rate;  // absent when there were no requests
};

AcceptanceStats acceptance_stats(const SessionMap& sessions, std::string_view arm);

// Throws kInvalidArgument for n == 0.
std::size_t unique_ngrams(std::string_view text, std::size_t n);
// Distinct n-grams over a set of texts; windows never cross text boundaries.
std::size_t unique_ngrams(std::span<const std::string> texts, std::size_t n);

// ---- Mann-Whitney-Wilcoxon -------------------------------------------------

inline constexpr std::size_t kExactMwwMaxProduct = 64;

struct MwwResult {
  double u = 0.0;  // for sample a, midranks for ties
  double z = 0.0;
  double p_normal = 1.0;          // tie-corrected, continuity-corrected
  std::optional<double> p_exact;  // when n_a * n_b <= kExactMwwMaxProduct
  double p_two_sided = 1.0;       // exact when available
  bool degenerate = false;        // every value identical; p reported as 1
  std::size_t n_a = 0;
  std::size_t n_b = 0;

  bool significant(double alpha = 0.05) const { return p_two_sided < alpha; }
};

// Throws kInvalidArgument when a sample is empty.
MwwResult mww_test(std::span<const double> a, std::span<const double> b);

// ---- surveys and skill -----------------------------------------------------

using SurveyMap = std::map<std::string, SurveyResponse>;  // by session_id

SurveyMap surveys_from_sessions(const SessionMap& sessions);
SurveyMap parse_surveys(std::string_view jsonl);
SurveyMap read_surveys(const std::filesystem::path& path);

inline constexpr int kSkilledAbove = 3;  // self_skill > 3 is skilled

struct SkillGroup {
  std::size_t users = 0;
  std::optional<double> mean_helpfulness;
  std::optional<double> mean_requests;
  std::size_t n_requests = 0;
  std::size_t n_accepted = 0;
  std::optional<double> acceptance_rate;
};

struct SkillBreakdown {
  SkillGroup novice;
  SkillGroup skilled;
  std::optional<MwwResult> helpfulness_test;
};

// Every session needs a survey; throws kMissingSurvey naming the first
// session without one.
SkillBreakdown skill_breakdown(const SessionMap& sessions, const SurveyMap& surveys);

// ---- length profiles -------------------------------------------------------

struct Quartiles {
  std::size_t n = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear interpolation between order statistics. Empty input -> absent.
std::optional<Quartiles> quartiles(std::vector<double> values);

struct RevisionSample {
  std::string session_id;
  std::string request_id;
  bool accepted = false;
  std::size_t draft_chars = 0;     // plain draft at request time
  std::size_t revision_chars = 0;  // target-only text of the decided suggestion
  std::string revised_text;        // target-only text, segments joined by " "
};

// One sample per decided round. A reject is measured against the first
// displayed suggestion.
std::vector<RevisionSample> revision_samples(const SessionMap& sessions);

struct LengthGroup {
  std::optional<Quartiles> draft_chars;
  std::optional<Quartiles> revision_chars;
  std::size_t n = 0;
};

struct LengthProfiles {
  std::map<std::string, LengthGroup> groups;  // accepted, rejected, novice, skilled
};

LengthProfiles length_profiles(const SessionMap& sessions, const SurveyMap& surveys = {});

// ---- third-party votes -----------------------------------------------------

struct VoteRecord {
  std::string image_id;
  std::string caption_a_id;
  std::string caption_b_id;
  std::vector<std::string> votes;  // "A" or "B", exactly three
  std::string condition_a = "A";
  std::string condition_b = "B";
};

VoteRecord vote_record_from_json(const nlohmann::json& j);
std::vector<VoteRecord> parse_votes(std::string_view jsonl);
std::vector<VoteRecord> read_votes(const std::filesystem::path& path);

struct VoteTally {
  std::string condition_a;
  std::string condition_b;
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
};

// 'A' or 'B'. Throws kMalformedRecord unless there are three A/B votes.
char majority_winner(const VoteRecord& record);
// One tally per (condition_a, condition_b), sorted.
std::vector<VoteTally> majority_vote(std::span<const VoteRecord> records);

// ---- error taxonomy --------------------------------------------------------

enum class SuggestionFlag { kVerbatimCopy, kOutOfRegionEdit, kPossibleDrift };
std::string_view to_string(SuggestionFlag f);

std::set<SuggestionFlag> flag_suggestion(const DemarcatedDraft& draft, std::string_view suggestion,
                                         const StopWords& stop_words = StopWords::builtin());

// ---- report ----------------------------------------------------------------

struct ArmMetrics {
  std::string arm;
  std::size_t sessions = 0;
  std::size_t submitted = 0;
  std::optional<double> mean_helpfulness;
  std::optional<double> mean_grammaticality;
  std::optional<double> mean_satisfaction;
  AcceptanceStats acceptance;
  std::optional<double> mean_rouge_l;
  std::size_t rouge_samples = 0;
  std::size_t caption_unique_trigrams = 0;
  std::map<std::string, std::size_t> flags;
  std::size_t suggestions_shown = 0;
};

struct PairwiseTest {
  std::string arm_a;
  std::string arm_b;
  std::string question;
  MwwResult result;
};

struct ReportInputs {
  SessionMap sessions;
  SurveyMap surveys;  // overrides surveys recorded in the log
  std::vector<VoteRecord> votes;
  std::map<std::string, std::vector<std::string>> caption_sets;
  RougeNormalization rouge = RougeNormalization::kSuggestion;
};

struct MetricsReport {
  std::vector<ArmMetrics> arms;
  std::vector<PairwiseTest> pairwise;
  std::optional<SkillBreakdown> skill;
  std::vector<std::string> missing_surveys;
  LengthProfiles lengths;
  std::vector<VoteTally> votes;
  std::map<std::string, std::size_t> caption_set_trigrams;
  std::size_t users = 0;
  std::vector<std::string> session_ids;
  RougeNormalization rouge = RougeNormalization::kSuggestion;

  // Sorted keys; identical inputs give identical bytes.
  nlohmann::json to_json() const;
  std::string to_text() const;
};

MetricsReport build_report(const ReportInputs& inputs);

std::map<std::string, std::vector<std::string>> parse_caption_sets(std::string_view jsonl);

}  // namespace milrw
