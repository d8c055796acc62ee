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

#include "milrw/events.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "milrw/error.hpp"

namespace milrw {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json config_json(const GenerationConfig& c) {
  return {{"k", c.k}, {"n_display", c.n_display}, {"seed", c.seed},
          {"temperature", c.temperature}};
}

GenerationConfig config_from(const json& j) {
  GenerationConfig c;
  c.k = j.at("k").get<std::size_t>();
  c.n_display = j.at("n_display").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.temperature = j.at("temperature").get<double>();
  return c;
}

json payload_json(const EventPayload& payload) {
  return std::visit(
      Overloaded{
          [](const event::SessionCreated& e) -> json {
            const auto& t = e.task;
            return {{"task",
                     {{"task_id", t.task_id},
                      {"image_ref", t.image_ref},
                      {"prompt_text", t.prompt_text},
                      {"constraints",
                       {{"min_caption_chars", t.constraints.min_caption_chars},
                        {"min_requests", t.constraints.min_requests}}}}},
                    {"arm", e.arm}};
          },
          [](const event::SuggestionRequested& e) -> json {
            return {{"raw_draft", e.raw_draft},
                    {"model_input", e.model_input},
                    {"suggestion_set",
                     {{"request_id", e.request_id},
                      {"suggestions", e.suggestions},
                      {"backend_id", e.backend_id},
                      {"config", config_json(e.config)}}}};
          },
          [](const event::DecisionMade& e) -> json {
            json j = {{"request_id", e.request_id}};
            if (e.action.kind == DecisionKind::kAccept) {
              j["action"] = "accept";
              j["index"] = e.action.index;
            } else {
              j["action"] = "reject";
            }
            return j;
          },
          [](const event::DraftEdited& e) -> json { return {{"new_draft", e.new_draft}}; },
          [](const event::CaptionSubmitted& e) -> json { return {{"caption", e.caption}}; },
          [](const event::SurveySubmitted& e) -> json {
            return {{"helpfulness", e.survey.helpfulness},
                    {"grammaticality", e.survey.grammaticality},
                    {"satisfaction", e.survey.satisfaction},
                    {"self_skill", e.survey.self_skill}};
          },
          [](const event::SessionClosed& e) -> json { return {{"reason", e.reason}}; },
      },
      payload);
}

EventPayload payload_from(std::string_view type, const json& p) {
  if (type == "SessionCreated") {
    const auto& t = p.at("task");
    event::SessionCreated e;
    e.task.task_id = t.at("task_id").get<std::string>();
    e.task.image_ref = t.at("image_ref").get<std::string>();
    e.task.prompt_text = t.at("prompt_text").get<std::string>();
    const auto& c = t.at("constraints");
    e.task.constraints.min_caption_chars = c.at("min_caption_chars").get<std::size_t>();
    e.task.constraints.min_requests = c.at("min_requests").get<std::size_t>();
    e.arm = p.at("arm").get<std::string>();
    return e;
  }
  if (type == "SuggestionRequested") {
    event::SuggestionRequested e;
    e.raw_draft = p.at("raw_draft").get<std::string>();
    e.model_input = p.at("model_input").get<std::string>();
    const auto& s = p.at("suggestion_set");
    e.request_id = s.at("request_id").get<std::string>();
    e.suggestions = s.at("suggestions").get<std::vector<std::string>>();
    e.backend_id = s.at("backend_id").get<std::string>();
    e.config = config_from(s.at("config"));
    return e;
  }
  if (type == "DecisionMade") {
    event::DecisionMade e;
    e.request_id = p.at("request_id").get<std::string>();
    const auto action = p.at("action").get<std::string>();
    if (action == "accept") {
      e.action = Decision::accept(p.at("index").get<std::size_t>());
    } else if (action == "reject") {
      e.action = Decision::reject();
    } else {
      fail(Errc::kCorruptLog, "unknown decision action \"" + action + "\"");
    }
    return e;
  }
  if (type == "DraftEdited") return event::DraftEdited{p.at("new_draft").get<std::string>()};
  if (type == "CaptionSubmitted") return event::CaptionSubmitted{p.at("caption").get<std::string>()};
  if (type == "SurveySubmitted") {
    return event::SurveySubmitted{{p.at("helpfulness").get<int>(), p.at("grammaticality").get<int>(),
                                   p.at("satisfaction").get<int>(), p.at("self_skill").get<int>()}};
  }
  if (type == "SessionClosed") return event::SessionClosed{p.at("reason").get<std::string>()};
  fail(Errc::kCorruptLog, "unknown event type \"" + std::string(type) + "\"");
}

[[noreturn]] void corrupt_at(std::size_t line, const std::string& reason) {
  Error err(Errc::kCorruptLog, "line " + std::to_string(line) + ": " + reason);
  err.line = line;
  throw err;
}

}  // namespace

void SurveyResponse::validate() const {
  for (int v : {helpfulness, grammaticality, satisfaction, self_skill}) {
    if (v < 1 || v > 5) {
      Error err(Errc::kSurveyOutOfRange, "survey answers must be integers in [1, 5]");
      err.actual = v;
      throw err;
    }
  }
}

std::string_view event_type_name(const EventPayload& payload) {
  return std::visit(
      Overloaded{
          [](const event::SessionCreated&) { return std::string_view("SessionCreated"); },
          [](const event::SuggestionRequested&) { return std::string_view("SuggestionRequested"); },
          [](const event::DecisionMade&) { return std::string_view("DecisionMade"); },
          [](const event::DraftEdited&) { return std::string_view("DraftEdited"); },
          [](const event::CaptionSubmitted&) { return std::string_view("CaptionSubmitted"); },
          [](const event::SurveySubmitted&) { return std::string_view("SurveySubmitted"); },
          [](const event::SessionClosed&) { return std::string_view("SessionClosed"); },
      },
      payload);
}

json to_json(const InteractionEvent& e) {
  return {{"event_id", e.event_id},
          {"session_id", e.session_id},
          {"ts", e.ts_ms},
          {"type", event_type_name(e.payload)},
          {"payload", payload_json(e.payload)}};
}

InteractionEvent event_from_json(const json& j) {
  try {
    InteractionEvent e;
    e.event_id = j.at("event_id").get<std::uint64_t>();
    e.session_id = j.at("session_id").get<std::string>();
    e.ts_ms = j.at("ts").get<std::int64_t>();
    e.payload = payload_from(j.at("type").get<std::string>(), j.at("payload"));
    if (e.session_id.empty()) fail(Errc::kCorruptLog, "empty session_id");
    return e;
  } catch (const json::exception& ex) {
    fail(Errc::kCorruptLog, std::string("malformed event: ") + ex.what());
  }
}

std::string header_line() {
  return json{{"schema", kEventSchema}}.dump() + "\n";
}

std::vector<InteractionEvent> read_event_log(std::string_view text) {
  std::vector<InteractionEvent> events;
  if (text.empty()) return events;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::uint64_t last_id = 0;
  while (pos < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) corrupt_at(line_no, "truncated line (no newline)");
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;

    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) corrupt_at(line_no, "not a JSON object");
    if (line_no == 1) {
      if (j.value("schema", "") != kEventSchema) {
        corrupt_at(line_no, "missing schema header {\"schema\":\"" + std::string(kEventSchema) + "\"}");
      }
      continue;
    }
    try {
      auto e = event_from_json(j);
      if (e.event_id <= last_id) corrupt_at(line_no, "event_id is not increasing");
      last_id = e.event_id;
      events.push_back(std::move(e));
    } catch (Error& e) {
      if (e.line) throw;
      corrupt_at(line_no, e.what());
    }
  }
  return events;
}

std::vector<InteractionEvent> read_event_log_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIoError, "cannot read event log " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return read_event_log(buf.str());
}

EventLog::EventLog() : text_(header_line()) {}

EventLog::EventLog(const std::filesystem::path& path) {
  std::string existing;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::kIoError, "cannot read event log " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    existing = buf.str();
  }
  fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    fail(Errc::kIoError, "cannot open event log " + path.string() + ": " + std::strerror(errno));
  }
  if (existing.empty()) {
    text_ = header_line();
    if (::write(fd_, text_.data(), text_.size()) != static_cast<ssize_t>(text_.size())) {
      fail(Errc::kIoError, "cannot write event log header");
    }
  } else {
    events_ = read_event_log(existing);
    text_ = std::move(existing);
    if (!events_.empty()) last_id_ = events_.back().event_id;
  }
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t EventLog::append(InteractionEvent& e) {
  std::lock_guard lock(mu_);
  e.event_id = last_id_ + 1;
  const std::string line = to_json(e).dump() + "\n";
  if (fd_ >= 0) {
    std::size_t written = 0;
    while (written < line.size()) {
      const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(Errc::kIoError, std::string("event log write failed: ") + std::strerror(errno));
      }
      written += static_cast<std::size_t>(n);
    }
  }
  last_id_ = e.event_id;
  text_ += line;
  events_.push_back(e);
  return e.event_id;
}

std::uint64_t EventLog::next_event_id() const {
  std::lock_guard lock(mu_);
  return last_id_ + 1;
}

std::string EventLog::snapshot() const {
  std::lock_guard lock(mu_);
  return text_;
}

std::string EventLog::snapshot(std::size_t bytes) const {
  std::lock_guard lock(mu_);
  if (bytes >= text_.size()) return text_;
  const auto nl = text_.rfind('\n', bytes == 0 ? 0 : bytes - 1);
  if (nl == std::string::npos || nl >= bytes) return {};
  return text_.substr(0, nl + 1);
}

std::size_t EventLog::size_bytes() const {
  std::lock_guard lock(mu_);
  return text_.size();
}

std::vector<InteractionEvent> EventLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

}  // namespace milrw
