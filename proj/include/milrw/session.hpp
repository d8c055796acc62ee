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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "milrw/events.hpp"
#include "milrw/generation.hpp"

// Event-sourced session engine. Every state change is an InteractionEvent;
// the live engine and replay() share apply_event(), so a replayed log
// reproduces the live state exactly.

namespace milrw {

enum class SessionState { kActive, kSubmitted, kClosed };
std::string_view to_string(SessionState s);

struct RoundRecord {
  std::string request_id;
  std::uint64_t requested_event_id = 0;
  std::string raw_draft;  // as typed, markup included
  std::string model_input;
  std::vector<std::string> suggestions;
  std::string backend_id;
  std::optional<Decision> decision;
  std::optional<std::uint64_t> decided_event_id;

  bool operator==(const RoundRecord&) const = default;
};

struct Session {
  std::string session_id;
  Task task;
  std::string arm;
  std::string current_draft;
  std::size_t request_count = 0;
  std::size_t accepted_count = 0;
  SessionState state = SessionState::kActive;
  std::optional<std::string> final_caption;
  std::optional<SurveyResponse> survey;
  std::vector<RoundRecord> rounds;
  std::uint64_t last_event_id = 0;
  std::int64_t last_activity_ms = 0;

  const RoundRecord* find_round(std::string_view request_id) const;
  bool operator==(const Session&) const = default;
};

using SessionMap = std::map<std::string, Session>;

nlohmann::json to_json(const Session& s);
Session session_from_json(const nlohmann::json& j);

// Applies one event, enforcing the session state machine. Throws Error
// (kUnknownSession, kSessionNotActive, kUnknownRequest, kAlreadyDecided,
// kBadIndex, kTooShort, kTooFewRequests, kNotSubmitted, kAlreadySurveyed,
// kSurveyOutOfRange, kInvalidRecord) without modifying `sessions`.
void apply_event(SessionMap& sessions, const InteractionEvent& e);

// Rebuilds every session from a log. Throws kCorruptLog (line set).
SessionMap replay(std::span<const InteractionEvent> events);
SessionMap replay(std::string_view log_text);

// Image x arm cells occupied by non-closed sessions.
using CellCounts = std::vector<std::vector<std::size_t>>;  // [task][arm]

// Balanced A/B assignment: prefer images whose arms are uneven and give them
// a deficient arm; otherwise any open cell. Ties are broken uniformly with
// an RNG derived from (seed, draw number) so choices are reproducible.
class BalancedAssigner {
 public:
  explicit BalancedAssigner(std::uint64_t seed) : seed_(seed) {}

  struct Pick {
    std::size_t task = 0;
    std::size_t arm = 0;
  };
  // std::nullopt when every cell is filled.
  std::optional<Pick> pick(const CellCounts& counts, std::uint64_t draw) const;

 private:
  std::uint64_t seed_;
};

struct Arm {
  std::string name;
  std::shared_ptr<GenerationBackend> backend;
};

struct EngineOptions {
  GenerationConfig generation;
  std::int64_t idle_timeout_ms = 2 * 60 * 60 * 1000;
  std::uint64_t assignment_seed = 0;
};

using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

class SessionEngine {
 public:
  // Existing events in `log` are replayed first, so a restarted engine
  // resumes where the log ends. Throws kInvalidConfig for an empty pool or
  // no arms.
  SessionEngine(std::vector<Task> pool, std::vector<Arm> arms, EventLog& log,
                EngineOptions options = {}, Clock clock = system_clock_ms);

  // Throws kPoolExhausted when every image x arm cell is filled.
  Session create_session();

  // Parses the draft, samples suggestions from the session arm's backend
  // and records the round. A draft that differs from the current one is
  // first recorded as DraftEdited. Errors leave the session unchanged.
  SuggestionSet record_suggestion_round(const std::string& session_id,
                                        std::string_view raw_draft);

  Session record_decision(const std::string& session_id, const std::string& request_id,
                          Decision action);
  Session edit_draft(const std::string& session_id, std::string new_draft);
  Session submit_caption(const std::string& session_id, std::string caption);
  Session submit_survey(const std::string& session_id, const SurveyResponse& survey);

  // Closes Active sessions idle for longer than the timeout. Returns how
  // many were closed.
  std::size_t expire_idle();

  Session get(const std::string& session_id) const;
  SessionMap sessions() const;
  const EventLog& log() const { return log_; }
  const std::vector<Task>& pool() const { return pool_; }
  const std::vector<Arm>& arms() const { return arms_; }
  const EngineOptions& options() const { return options_; }

 private:
  std::mutex& session_mutex(const std::string& session_id);
  // Validates `payload` against the current state, appends it and applies it.
  Session commit(const std::string& session_id, EventPayload payload);
  Session commit_locked(const std::string& session_id, EventPayload payload);
  CellCounts cell_counts_locked() const;

  std::vector<Task> pool_;
  std::vector<Arm> arms_;
  EventLog& log_;
  EngineOptions options_;
  Clock clock_;
  BalancedAssigner assigner_;

  mutable std::mutex mu_;  // sessions_, session_mutexes_, created_
  SessionMap sessions_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_mutexes_;
  std::uint64_t created_ = 0;
};

}  // namespace milrw
