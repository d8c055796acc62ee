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
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "milrw/generation.hpp"

// Interaction events and the append-only JSONL log that is the system of
// record for sessions. Line format:
//   {"schema":"milrw-events/1"}                                  (header)
//   {"event_id":N,"session_id":...,"ts":ms,"type":...,"payload":{...}}

namespace milrw {

inline constexpr std::string_view kEventSchema = "milrw-events/1";

struct SessionConstraints {
  std::size_t min_caption_chars = 100;
  std::size_t min_requests = 2;

  bool operator==(const SessionConstraints&) const = default;
};

struct Task {
  std::string task_id;
  std::string image_ref;  // opaque; never sent to a backend
  std::string prompt_text;
  SessionConstraints constraints;

  bool operator==(const Task&) const = default;
};

struct SurveyResponse {
  int helpfulness = 0;
  int grammaticality = 0;
  int satisfaction = 0;
  int self_skill = 0;

  // Throws kSurveyOutOfRange unless every answer is in [1, 5].
  void validate() const;
  bool operator==(const SurveyResponse&) const = default;
};

enum class DecisionKind { kAccept, kReject };

struct Decision {
  DecisionKind kind = DecisionKind::kReject;
  std::size_t index = 0;  // accepted suggestion, 0-based

  static Decision accept(std::size_t i) { return {DecisionKind::kAccept, i}; }
  static Decision reject() { return {DecisionKind::kReject, 0}; }
  bool operator==(const Decision&) const = default;
};

namespace event {

struct SessionCreated {
  Task task;
  std::string arm;
};

struct SuggestionRequested {
  std::string raw_draft;
  std::string model_input;
  std::string request_id;
  std::vector<std::string> suggestions;
  std::string backend_id;
  GenerationConfig config;
};

struct DecisionMade {
  std::string request_id;
  Decision action;
};

struct DraftEdited {
  std::string new_draft;
};

struct CaptionSubmitted {
  std::string caption;
};

struct SurveySubmitted {
  SurveyResponse survey;
};

// Idle expiry. Not a user action; recorded so replay sees the transition.
struct SessionClosed {
  std::string reason;
};

}  // namespace event

using EventPayload =
    std::variant<event::SessionCreated, event::SuggestionRequested, event::DecisionMade,
                 event::DraftEdited, event::CaptionSubmitted, event::SurveySubmitted,
                 event::SessionClosed>;

struct InteractionEvent {
  std::uint64_t event_id = 0;
  std::string session_id;
  std::int64_t ts_ms = 0;  // wall clock, informational only
  EventPayload payload;
};

std::string_view event_type_name(const EventPayload& payload);

nlohmann::json to_json(const InteractionEvent& e);
// Throws kCorruptLog on schema violations.
InteractionEvent event_from_json(const nlohmann::json& j);

std::string header_line();

// Parses a whole log (header + events). Lines are counted from 1; an
// incomplete trailing line (no '\n') is reported as corrupt. An empty text
// is an empty log. Throws kCorruptLog with Error::line set.
std::vector<InteractionEvent> read_event_log(std::string_view text);
std::vector<InteractionEvent> read_event_log_file(const std::filesystem::path& path);

// Append-only writer. Each event is one write(2) on an O_APPEND
// descriptor; a torn write can only damage the last line, which readers
// report as corrupt.
class EventLog {
 public:
  // In-memory log.
  EventLog();
  // File-backed log; an existing file is read (and validated) first.
  explicit EventLog(const std::filesystem::path& path);
  ~EventLog();

  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  // Assigns the next event_id, writes the line, returns the id.
  std::uint64_t append(InteractionEvent& e);
  std::uint64_t next_event_id() const;

  // Entire log text, header included.
  std::string snapshot() const;
  // Prefix of the log text of at most `bytes` bytes (on a line boundary).
  std::string snapshot(std::size_t bytes) const;
  std::size_t size_bytes() const;
  std::vector<InteractionEvent> events() const;

 private:
  mutable std::mutex mu_;
  std::string text_;
  std::vector<InteractionEvent> events_;
  std::uint64_t last_id_ = 0;
  int fd_ = -1;
};

}  // namespace milrw
