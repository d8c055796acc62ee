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

#include "milrw/session.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>

#include "milrw/error.hpp"
#include "milrw/markup.hpp"
#include "milrw/rng.hpp"
#include "milrw/text.hpp"

namespace milrw {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void gate_failure(Errc code, const std::string& what, std::size_t actual,
                               std::size_t required) {
  Error err(code, what + ": " + std::to_string(actual) + " < " + std::to_string(required));
  err.actual = static_cast<std::int64_t>(actual);
  err.required = static_cast<std::int64_t>(required);
  throw err;
}

void require_active(const Session& s) {
  if (s.state != SessionState::kActive) {
    fail(Errc::kSessionNotActive,
         "session " + s.session_id + " is " + std::string(to_string(s.state)));
  }
}

void apply_to(Session& s, const InteractionEvent& e) {
  std::visit(
      Overloaded{
          [](const event::SessionCreated&) {
            fail(Errc::kInvalidRecord, "session already exists");
          },
          [&](const event::SuggestionRequested& p) {
            require_active(s);
            if (s.find_round(p.request_id)) {
              fail(Errc::kInvalidRecord, "duplicate request_id " + p.request_id);
            }
            if (p.suggestions.empty()) fail(Errc::kInvalidRecord, "round without suggestions");
            RoundRecord r;
            r.request_id = p.request_id;
            r.requested_event_id = e.event_id;
            r.raw_draft = p.raw_draft;
            r.model_input = p.model_input;
            r.suggestions = p.suggestions;
            r.backend_id = p.backend_id;
            s.rounds.push_back(std::move(r));
            s.current_draft = p.raw_draft;
            ++s.request_count;
          },
          [&](const event::DecisionMade& p) {
            require_active(s);
            auto it = std::find_if(s.rounds.begin(), s.rounds.end(), [&](const RoundRecord& r) {
              return r.request_id == p.request_id;
            });
            if (it == s.rounds.end()) fail(Errc::kUnknownRequest, "unknown request " + p.request_id);
            if (it->decision) fail(Errc::kAlreadyDecided, "request " + p.request_id + " already decided");
            if (p.action.kind == DecisionKind::kAccept) {
              if (p.action.index >= it->suggestions.size()) {
                fail(Errc::kBadIndex, "suggestion index " + std::to_string(p.action.index) +
                                          " out of range");
              }
              s.current_draft = it->suggestions[p.action.index];
              ++s.accepted_count;
            }
            it->decision = p.action;
            it->decided_event_id = e.event_id;
          },
          [&](const event::DraftEdited& p) {
            require_active(s);
            s.current_draft = p.new_draft;
          },
          [&](const event::CaptionSubmitted& p) {
            require_active(s);
            const auto chars = utf8_length(p.caption);
            const auto& c = s.task.constraints;
            if (chars < c.min_caption_chars) {
              gate_failure(Errc::kTooShort, "caption too short", chars, c.min_caption_chars);
            }
            if (s.request_count < c.min_requests) {
              gate_failure(Errc::kTooFewRequests, "too few suggestion requests", s.request_count,
                           c.min_requests);
            }
            s.state = SessionState::kSubmitted;
            s.final_caption = p.caption;
            s.current_draft = p.caption;
          },
          [&](const event::SurveySubmitted& p) {
            if (s.state != SessionState::kSubmitted) {
              fail(Errc::kNotSubmitted, "survey requires a submitted caption");
            }
            if (s.survey) fail(Errc::kAlreadySurveyed, "survey already recorded");
            p.survey.validate();
            s.survey = p.survey;
          },
          [&](const event::SessionClosed&) {
            require_active(s);
            s.state = SessionState::kClosed;
            s.final_caption = s.current_draft;
          },
      },
      e.payload);
}

json survey_json(const SurveyResponse& r) {
  return {{"helpfulness", r.helpfulness},
          {"grammaticality", r.grammaticality},
          {"satisfaction", r.satisfaction},
          {"self_skill", r.self_skill}};
}

}  // namespace

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::kActive: return "active";
    case SessionState::kSubmitted: return "submitted";
    case SessionState::kClosed: return "closed";
  }
  return "active";
}

const RoundRecord* Session::find_round(std::string_view request_id) const {
  for (const auto& r : rounds) {
    if (r.request_id == request_id) return &r;
  }
  return nullptr;
}

json to_json(const Session& s) {
  json rounds = json::array();
  for (const auto& r : s.rounds) {
    json jr = {{"request_id", r.request_id},
               {"requested_event_id", r.requested_event_id},
               {"raw_draft", r.raw_draft},
               {"model_input", r.model_input},
               {"suggestions", r.suggestions},
               {"backend_id", r.backend_id}};
    if (r.decision) {
      jr["decision"] = r.decision->kind == DecisionKind::kAccept
                           ? json{{"action", "accept"}, {"index", r.decision->index}}
                           : json{{"action", "reject"}};
      jr["decided_event_id"] = *r.decided_event_id;
    }
    rounds.push_back(std::move(jr));
  }
  json j = {{"session_id", s.session_id},
            {"task",
             {{"task_id", s.task.task_id},
              {"image_ref", s.task.image_ref},
              {"prompt_text", s.task.prompt_text},
              {"constraints",
               {{"min_caption_chars", s.task.constraints.min_caption_chars},
                {"min_requests", s.task.constraints.min_requests}}}}},
            {"arm", s.arm},
            {"current_draft", s.current_draft},
            {"request_count", s.request_count},
            {"accepted_count", s.accepted_count},
            {"state", to_string(s.state)},
            {"rounds", std::move(rounds)},
            {"last_event_id", s.last_event_id},
            {"last_activity_ms", s.last_activity_ms}};
  if (s.final_caption) j["final_caption"] = *s.final_caption;
  if (s.survey) j["survey"] = survey_json(*s.survey);
  return j;
}

Session session_from_json(const json& j) {
  try {
    Session s;
    s.session_id = j.at("session_id").get<std::string>();
    const auto& t = j.at("task");
    s.task.task_id = t.at("task_id").get<std::string>();
    s.task.image_ref = t.at("image_ref").get<std::string>();
    s.task.prompt_text = t.at("prompt_text").get<std::string>();
    s.task.constraints.min_caption_chars =
        t.at("constraints").at("min_caption_chars").get<std::size_t>();
    s.task.constraints.min_requests = t.at("constraints").at("min_requests").get<std::size_t>();
    s.arm = j.at("arm").get<std::string>();
    s.current_draft = j.at("current_draft").get<std::string>();
    s.request_count = j.at("request_count").get<std::size_t>();
    s.accepted_count = j.at("accepted_count").get<std::size_t>();
    const auto state = j.at("state").get<std::string>();
    if (state == "active") s.state = SessionState::kActive;
    else if (state == "submitted") s.state = SessionState::kSubmitted;
    else if (state == "closed") s.state = SessionState::kClosed;
    else fail(Errc::kInvalidRecord, "unknown session state " + state);
    for (const auto& jr : j.at("rounds")) {
      RoundRecord r;
      r.request_id = jr.at("request_id").get<std::string>();
      r.requested_event_id = jr.at("requested_event_id").get<std::uint64_t>();
      r.raw_draft = jr.at("raw_draft").get<std::string>();
      r.model_input = jr.at("model_input").get<std::string>();
      r.suggestions = jr.at("suggestions").get<std::vector<std::string>>();
      r.backend_id = jr.at("backend_id").get<std::string>();
      if (auto d = jr.find("decision"); d != jr.end()) {
        r.decision = d->at("action").get<std::string>() == "accept"
                         ? Decision::accept(d->at("index").get<std::size_t>())
                         : Decision::reject();
        r.decided_event_id = jr.at("decided_event_id").get<std::uint64_t>();
      }
      s.rounds.push_back(std::move(r));
    }
    s.last_event_id = j.at("last_event_id").get<std::uint64_t>();
    s.last_activity_ms = j.at("last_activity_ms").get<std::int64_t>();
    if (auto c = j.find("final_caption"); c != j.end()) s.final_caption = c->get<std::string>();
    if (auto v = j.find("survey"); v != j.end()) {
      s.survey = SurveyResponse{v->at("helpfulness").get<int>(), v->at("grammaticality").get<int>(),
                                v->at("satisfaction").get<int>(), v->at("self_skill").get<int>()};
    }
    return s;
  } catch (const json::exception& e) {
    fail(Errc::kInvalidRecord, std::string("bad session snapshot: ") + e.what());
  }
}

void apply_event(SessionMap& sessions, const InteractionEvent& e) {
  if (const auto* created = std::get_if<event::SessionCreated>(&e.payload)) {
    if (sessions.count(e.session_id)) {
      fail(Errc::kInvalidRecord, "session " + e.session_id + " created twice");
    }
    Session s;
    s.session_id = e.session_id;
    s.task = created->task;
    s.arm = created->arm;
    s.last_event_id = e.event_id;
    s.last_activity_ms = e.ts_ms;
    sessions.emplace(e.session_id, std::move(s));
    return;
  }
  auto it = sessions.find(e.session_id);
  if (it == sessions.end()) fail(Errc::kUnknownSession, "unknown session " + e.session_id);
  if (e.event_id <= it->second.last_event_id) {
    fail(Errc::kInvalidRecord, "event_id does not increase within session");
  }
  Session updated = it->second;
  apply_to(updated, e);
  updated.last_event_id = e.event_id;
  updated.last_activity_ms = e.ts_ms;
  it->second = std::move(updated);
}

SessionMap replay(std::span<const InteractionEvent> events) {
  SessionMap sessions;
  for (std::size_t i = 0; i < events.size(); ++i) {
    try {
      apply_event(sessions, events[i]);
    } catch (const Error& e) {
      // Line 1 is the schema header.
      Error err(Errc::kCorruptLog, "line " + std::to_string(i + 2) + ": " + e.what());
      err.line = i + 2;
      throw err;
    }
  }
  return sessions;
}

SessionMap replay(std::string_view log_text) {
  const auto events = read_event_log(log_text);
  return replay(std::span<const InteractionEvent>(events));
}

std::optional<BalancedAssigner::Pick> BalancedAssigner::pick(const CellCounts& counts,
                                                             std::uint64_t draw) const {
  Rng rng(derive_seed(seed_, "assign:" + std::to_string(draw)));
  std::vector<std::size_t> uneven;
  std::vector<Pick> open;
  for (std::size_t t = 0; t < counts.size(); ++t) {
    bool any_filled = false;
    bool any_open = false;
    for (std::size_t a = 0; a < counts[t].size(); ++a) {
      if (counts[t][a] == 0) {
        any_open = true;
        open.push_back({t, a});
      } else {
        any_filled = true;
      }
    }
    if (any_filled && any_open) uneven.push_back(t);
  }
  if (open.empty()) return std::nullopt;
  if (uneven.empty()) return open[rng.below(open.size())];

  const std::size_t task = uneven[rng.below(uneven.size())];
  std::vector<std::size_t> deficient;
  for (std::size_t a = 0; a < counts[task].size(); ++a) {
    if (counts[task][a] == 0) deficient.push_back(a);
  }
  return Pick{task, deficient[rng.below(deficient.size())]};
}

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

SessionEngine::SessionEngine(std::vector<Task> pool, std::vector<Arm> arms, EventLog& log,
                             EngineOptions options, Clock clock)
    : pool_(std::move(pool)),
      arms_(std::move(arms)),
      log_(log),
      options_(options),
      clock_(std::move(clock)),
      assigner_(options.assignment_seed) {
  if (pool_.empty()) fail(Errc::kInvalidConfig, "task pool is empty");
  if (arms_.empty()) fail(Errc::kInvalidConfig, "at least one arm is required");
  std::set<std::string> names;
  for (const auto& arm : arms_) {
    if (!arm.backend) fail(Errc::kInvalidConfig, "arm " + arm.name + " has no backend");
    if (!names.insert(arm.name).second) fail(Errc::kInvalidConfig, "duplicate arm " + arm.name);
  }
  std::set<std::string> ids;
  for (const auto& t : pool_) {
    if (!ids.insert(t.task_id).second) fail(Errc::kInvalidConfig, "duplicate task " + t.task_id);
  }
  options_.generation.validate();
  const auto events = log_.events();
  sessions_ = replay(std::span<const InteractionEvent>(events));
  created_ = sessions_.size();
}

std::mutex& SessionEngine::session_mutex(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto& slot = session_mutexes_[session_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

CellCounts SessionEngine::cell_counts_locked() const {
  CellCounts counts(pool_.size(), std::vector<std::size_t>(arms_.size(), 0));
  for (const auto& [id, s] : sessions_) {
    if (s.state == SessionState::kClosed) continue;
    auto t = std::find_if(pool_.begin(), pool_.end(),
                          [&](const Task& task) { return task.task_id == s.task.task_id; });
    auto a = std::find_if(arms_.begin(), arms_.end(),
                          [&](const Arm& arm) { return arm.name == s.arm; });
    if (t == pool_.end() || a == arms_.end()) continue;
    ++counts[static_cast<std::size_t>(t - pool_.begin())][static_cast<std::size_t>(a - arms_.begin())];
  }
  return counts;
}

Session SessionEngine::commit_locked(const std::string& session_id, EventPayload payload) {
  InteractionEvent e;
  e.session_id = session_id;
  e.ts_ms = clock_();
  e.payload = std::move(payload);
  e.event_id = log_.next_event_id();

  SessionMap scratch;
  if (auto it = sessions_.find(session_id); it != sessions_.end()) scratch.emplace(*it);
  apply_event(scratch, e);
  log_.append(e);
  auto& stored = sessions_[session_id];
  stored = std::move(scratch.at(session_id));
  return stored;
}

Session SessionEngine::commit(const std::string& session_id, EventPayload payload) {
  std::lock_guard lock(mu_);
  return commit_locked(session_id, std::move(payload));
}

Session SessionEngine::create_session() {
  std::lock_guard lock(mu_);
  const auto pick = assigner_.pick(cell_counts_locked(), created_);
  if (!pick) fail(Errc::kPoolExhausted, "every image has a session for every arm");
  char id[32];
  std::snprintf(id, sizeof id, "s-%06llu", static_cast<unsigned long long>(created_ + 1));
  auto s = commit_locked(id, event::SessionCreated{pool_[pick->task], arms_[pick->arm].name});
  ++created_;
  return s;
}

SuggestionSet SessionEngine::record_suggestion_round(const std::string& session_id,
                                                     std::string_view raw_draft) {
  std::lock_guard session_lock(session_mutex(session_id));
  Session current = get(session_id);
  require_active(current);

  const auto draft = parse_markup(raw_draft);
  const auto input = to_model_input(draft);
  auto arm = std::find_if(arms_.begin(), arms_.end(),
                          [&](const Arm& a) { return a.name == current.arm; });
  if (arm == arms_.end()) fail(Errc::kInvalidConfig, "session arm is not configured");

  const std::string request_id =
      session_id + "-r" + std::to_string(current.request_count + 1);
  auto set = request_suggestions(input, options_.generation, *arm->backend, request_id);

  std::lock_guard lock(mu_);
  if (sessions_.at(session_id).current_draft != raw_draft) {
    commit_locked(session_id, event::DraftEdited{std::string(raw_draft)});
  }
  commit_locked(session_id, event::SuggestionRequested{std::string(raw_draft), input.text,
                                                       set.request_id, set.suggestions,
                                                       set.backend_id, set.config});
  return set;
}

Session SessionEngine::record_decision(const std::string& session_id,
                                       const std::string& request_id, Decision action) {
  std::lock_guard session_lock(session_mutex(session_id));
  return commit(session_id, event::DecisionMade{request_id, action});
}

Session SessionEngine::edit_draft(const std::string& session_id, std::string new_draft) {
  std::lock_guard session_lock(session_mutex(session_id));
  return commit(session_id, event::DraftEdited{std::move(new_draft)});
}

Session SessionEngine::submit_caption(const std::string& session_id, std::string caption) {
  std::lock_guard session_lock(session_mutex(session_id));
  return commit(session_id, event::CaptionSubmitted{std::move(caption)});
}

Session SessionEngine::submit_survey(const std::string& session_id,
                                     const SurveyResponse& survey) {
  std::lock_guard session_lock(session_mutex(session_id));
  return commit(session_id, event::SurveySubmitted{survey});
}

std::size_t SessionEngine::expire_idle() {
  std::lock_guard lock(mu_);
  const auto now = clock_();
  std::vector<std::string> idle;
  for (const auto& [id, s] : sessions_) {
    if (s.state == SessionState::kActive && now - s.last_activity_ms > options_.idle_timeout_ms) {
      idle.push_back(id);
    }
  }
  for (const auto& id : idle) commit_locked(id, event::SessionClosed{"idle_timeout"});
  return idle.size();
}

Session SessionEngine::get(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) fail(Errc::kUnknownSession, "unknown session " + session_id);
  return it->second;
}

SessionMap SessionEngine::sessions() const {
  std::lock_guard lock(mu_);
  return sessions_;
}

}  // namespace milrw
