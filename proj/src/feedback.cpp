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

#include "milrw/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "milrw/error.hpp"
#include "milrw/markup.hpp"
#include "milrw/rng.hpp"

namespace milrw {

using nlohmann::json;

namespace {

TrainingPair make_pair(std::string source, std::string target, ExampleType type,
                       const Session& s, const RoundRecord& r) {
  TrainingPair p;
  p.source = std::move(source);
  p.target = std::move(target);
  p.example_type = type;
  p.provenance.session_id = s.session_id;
  p.provenance.request_id = r.request_id;
  p.provenance.event_id = r.decided_event_id;
  return p;
}

}  // namespace

std::vector<TrainingPair> extract_pairs(const SessionMap& sessions,
                                        const FeedbackOptions& options) {
  std::vector<TrainingPair> out;
  for (const auto& [id, s] : sessions) {
    if (s.state == SessionState::kClosed && !options.include_closed) continue;
    std::vector<const RoundRecord*> decided;
    for (const auto& r : s.rounds) {
      if (r.decision) decided.push_back(&r);
    }
    std::stable_sort(decided.begin(), decided.end(), [](const auto* a, const auto* b) {
      return *a->decided_event_id < *b->decided_event_id;
    });
    for (const auto* r : decided) {
      const std::string draft = parse_markup(r->raw_draft).plain_text();
      if (r->decision->kind == DecisionKind::kAccept) {
        const auto chosen = r->decision->index;
        out.push_back(make_pair(draft, r->suggestions.at(chosen),
                                ExampleType::kFeedbackAccept, s, *r));
        if (options.siblings_as_rejects) {
          for (std::size_t i = 0; i < r->suggestions.size(); ++i) {
            if (i == chosen) continue;
            out.push_back(make_pair(r->suggestions[i], draft, ExampleType::kFeedbackReject, s, *r));
          }
        }
      } else {
        const std::size_t n = options.reject_all_shown ? r->suggestions.size() : 1;
        for (std::size_t i = 0; i < n; ++i) {
          out.push_back(make_pair(r->suggestions[i], draft, ExampleType::kFeedbackReject, s, *r));
        }
      }
    }
  }
  return out;
}

std::vector<TrainingPair> extract_pairs(std::span<const InteractionEvent> events,
                                        const FeedbackOptions& options) {
  return extract_pairs(replay(events), options);
}

std::vector<TrainingPair> extract_pairs_from_log(std::string_view log_text,
                                                 const FeedbackOptions& options) {
  return extract_pairs(replay(log_text), options);
}

FeedbackDataset mix_with_count(std::vector<TrainingPair> pairs,
                               std::span<const TrainingPair> base, std::size_t count,
                               std::uint64_t seed) {
  std::vector<std::size_t> eligible;
  const bool any_split = std::any_of(base.begin(), base.end(), [](const TrainingPair& p) {
    return p.split != Split::kUnsplit;
  });
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!any_split || base[i].split == Split::kTrain) eligible.push_back(i);
  }
  if (eligible.empty() || eligible.size() < count) {
    Error err(Errc::kInsufficientBase, "base corpus has " + std::to_string(eligible.size()) +
                                           " eligible pairs, " + std::to_string(count) +
                                           " requested");
    err.actual = static_cast<std::int64_t>(eligible.size());
    err.required = static_cast<std::int64_t>(count);
    throw err;
  }
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  Rng rng(derive_seed(seed, "feedback-mix"));
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + rng.below(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(count);

  FeedbackDataset ds;
  ds.pairs = std::move(pairs);
  ds.seed = seed;
  ds.ratio = ds.pairs.empty() ? 0.0 : static_cast<double>(count) / ds.pairs.size();
  ds.mixed_original.reserve(count);
  for (auto i : eligible) ds.mixed_original.push_back(base[i]);
  return ds;
}

FeedbackDataset mix_with_original(std::vector<TrainingPair> pairs,
                                  std::span<const TrainingPair> base, double ratio,
                                  std::uint64_t seed) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    fail(Errc::kInvalidArgument, "ratio must be a positive number");
  }
  const auto count =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(pairs.size()) + 1e-9));
  auto ds = mix_with_count(std::move(pairs), base, count, seed);
  ds.ratio = ratio;
  return ds;
}

json FeedbackDataset::manifest() const {
  std::size_t accepts = 0;
  std::size_t rejects = 0;
  std::set<std::string> sessions;
  for (const auto& p : pairs) {
    (p.example_type == ExampleType::kFeedbackAccept ? accepts : rejects) += 1;
    sessions.insert(p.provenance.session_id);
  }
  return {{"seed", seed},
          {"ratio", ratio},
          {"counts",
           {{"feedback_accept", accepts},
            {"feedback_reject", rejects},
            {"feedback_pairs", pairs.size()},
            {"mixed_original", mixed_original.size()},
            {"total", pairs.size() + mixed_original.size()}}},
          {"source_sessions", sessions},
          {"reference_recipe", reference_feedback_recipe()}};
}

std::string FeedbackDataset::to_jsonl() const {
  std::string out;
  for (const auto& p : pairs) out += to_jsonl_line(p) + '\n';
  for (const auto& p : mixed_original) out += to_jsonl_line(p) + '\n';
  return out;
}

void write_feedback(const FeedbackDataset& dataset, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(Errc::kIoError, "cannot create " + out_dir.string() + ": " + ec.message());
  auto write = [](const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) fail(Errc::kIoError, "cannot write " + path.string());
  };
  write(out_dir / "feedback.jsonl", dataset.to_jsonl());
  write(out_dir / "manifest.json", dataset.manifest().dump(2) + "\n");
}

json reference_feedback_recipe() {
  return {{"epochs", 5},
          {"learning_rate", 3e-6},
          {"cross_validation_folds", 5},
          {"loss", "label-smoothed cross-entropy"},
          {"reference_feedback_pairs", 474},
          {"reference_sampled_original", 450},
          {"reference_total", 924},
          {"reference_p_value", 0.402},
          {"executed", false}};
}

}  // namespace milrw
