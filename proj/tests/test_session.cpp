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

#include <random>
#include <set>
#include <thread>

#include "doctest.h"
#include "markup_fuzz.hpp"
#include "milrw/error.hpp"
#include "milrw/events.hpp"
#include "milrw/session.hpp"
#include "support.hpp"

using namespace milrw;
using milrw::testing::error_code;
using milrw::testing::read_file;
using milrw::testing::TempDir;

namespace {

std::vector<Task> make_pool(std::size_t n, SessionConstraints c = {}) {
  std::vector<Task> pool;
  for (std::size_t i = 0; i < n; ++i) {
    pool.push_back({"task-" + std::to_string(i), "img-" + std::to_string(i) + ".jpg",
                    "Describe the picture.", c});
  }
  return pool;
}

std::vector<Arm> make_arms() {
  return {{"cra", std::make_shared<StubBackend>(3, StubMode::kRewrite)},
          {"baseline", std::make_shared<StubBackend>(3, StubMode::kInfillOnly)}};
}

struct Harness {
  explicit Harness(std::size_t images = 2, SessionConstraints c = {}, std::int64_t idle = 60'000)
      : engine(make_pool(images, c), make_arms(), log,
               EngineOptions{GenerationConfig{10, 3, 99, 1.0}, idle, 5},
               [this] { return now += 1000; }) {}
  std::int64_t now = 1'700'000'000'000;
  EventLog log;
  SessionEngine engine;
};

const std::string kLongCaption(120, 'x');

}  // namespace

TEST_CASE("event JSON round trip for every type") {
  GenerationConfig cfg{10, 3, 7, 0.8};
  std::vector<EventPayload> payloads = {
      event::SessionCreated{{"t1", "img.jpg", "prompt", {100, 2}}, "cra"},
      event::SuggestionRequested{"a [b] c", "a <replace> b </replace> c", "s-1-r1", {"x", "y", "z"}, "stub", cfg},
      event::DecisionMade{"s-1-r1", Decision::accept(2)},
      event::DecisionMade{"s-1-r1", Decision::reject()},
      event::DraftEdited{"new"},
      event::CaptionSubmitted{"caption"},
      event::SurveySubmitted{{1, 2, 3, 4}},
      event::SessionClosed{"idle_timeout"},
  };
  std::uint64_t id = 1;
  for (const auto& p : payloads) {
    InteractionEvent e{id++, "s-1", 123, p};
    const auto j = to_json(e);
    const auto back = event_from_json(nlohmann::json::parse(j.dump()));
    CHECK(to_json(back) == j);
    CHECK(j.at("type") == event_type_name(p));
  }
  CHECK(error_code([] { event_from_json(nlohmann::json::parse(R"({"event_id":1})")); }) == Errc::kCorruptLog);
  CHECK(error_code([] {
          event_from_json(nlohmann::json::parse(
              R"({"event_id":1,"session_id":"s","ts":0,"type":"Bogus","payload":{}})"));
        }) == Errc::kCorruptLog);
}

TEST_CASE("log reader reports corrupt lines") {
  Harness h;
  const auto s = h.engine.create_session();
  h.engine.record_suggestion_round(s.session_id, "a [wave] here");
  const std::string text = h.log.snapshot();
  CHECK(text.starts_with(header_line()));
  CHECK(read_event_log(text).size() == 3);
  CHECK(read_event_log("").empty());
  CHECK(read_event_log(header_line()).empty());

  auto line_of = [](const std::string& t) -> std::optional<std::size_t> {
    try {
      read_event_log(t);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kCorruptLog);
      return e.line;
    }
    return std::nullopt;
  };
  CHECK(line_of(text.substr(0, text.size() - 5)) == 4u);
  CHECK(line_of(text.substr(0, text.size() - 1)) == 4u);
  CHECK(line_of("{\"schema\":\"other\"}\n") == 1u);
  CHECK(line_of(header_line() + "not json\n") == 2u);

  // Prefixes cut on a line boundary stay readable.
  for (std::size_t cut = 0; cut <= text.size(); ++cut) {
    const auto prefix = h.log.snapshot(cut);
    CHECK(prefix.size() <= cut);
    CHECK(text.starts_with(prefix));
    CHECK_NOTHROW(replay(prefix));
  }
}

TEST_CASE("session lifecycle and gates") {
  Harness h(2, {100, 2});
  const auto s = h.engine.create_session();
  CHECK(s.state == SessionState::kActive);
  const auto id = s.session_id;

  CHECK(error_code([&] { h.engine.record_suggestion_round(id, "no markup at all"); }) ==
        Errc::kNoDemarcations);
  CHECK(error_code([&] { h.engine.record_suggestion_round(id, "bad [markup"); }) ==
        Errc::kUnbalancedBrackets);
  CHECK(h.engine.get(id).request_count == 0);
  CHECK(h.engine.get(id).current_draft.empty());

  const auto r1 = h.engine.record_suggestion_round(id, "The [wave] crashed on the rocks.");
  REQUIRE(r1.suggestions.size() == 3);
  CHECK(r1.request_id == id + "-r1");
  CHECK(h.engine.get(id).current_draft == "The [wave] crashed on the rocks.");

  CHECK(error_code([&] { h.engine.record_decision(id, "nope", Decision::reject()); }) ==
        Errc::kUnknownRequest);
  CHECK(error_code([&] { h.engine.record_decision(id, r1.request_id, Decision::accept(3)); }) ==
        Errc::kBadIndex);
  auto after = h.engine.record_decision(id, r1.request_id, Decision::accept(1));
  CHECK(after.current_draft == r1.suggestions[1]);
  CHECK(after.accepted_count == 1);
  CHECK(error_code([&] { h.engine.record_decision(id, r1.request_id, Decision::reject()); }) ==
        Errc::kAlreadyDecided);

  try {
    h.engine.submit_caption(id, kLongCaption);
    FAIL("expected TooFewRequests");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kTooFewRequests);
    CHECK(e.actual == 1);
    CHECK(e.required == 2);
  }

  const auto r2 = h.engine.record_suggestion_round(id, "A [towering] sea ___ rose.");
  after = h.engine.record_decision(id, r2.request_id, Decision::reject());
  CHECK(after.current_draft == "A [towering] sea ___ rose.");
  CHECK(after.request_count == 2);
  CHECK(after.accepted_count == 1);

  try {
    h.engine.submit_caption(id, std::string(99, 'y'));
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kTooShort);
    CHECK(e.actual == 99);
    CHECK(e.required == 100);
  }
  // Length counts code points, not bytes.
  std::string accented;
  for (int i = 0; i < 60; ++i) accented += "\xc3\xa9";
  CHECK(error_code([&] { h.engine.submit_caption(id, accented); }) == Errc::kTooShort);

  CHECK(error_code([&] { h.engine.submit_survey(id, {3, 3, 3, 3}); }) == Errc::kNotSubmitted);
  after = h.engine.submit_caption(id, kLongCaption);
  CHECK(after.state == SessionState::kSubmitted);
  CHECK(after.final_caption == kLongCaption);
  CHECK(error_code([&] { h.engine.record_suggestion_round(id, "a [b]"); }) ==
        Errc::kSessionNotActive);
  CHECK(error_code([&] { h.engine.submit_caption(id, kLongCaption); }) == Errc::kSessionNotActive);
  CHECK(error_code([&] { h.engine.submit_survey(id, {0, 3, 3, 3}); }) == Errc::kSurveyOutOfRange);
  CHECK(error_code([&] { h.engine.submit_survey(id, {3, 3, 6, 3}); }) == Errc::kSurveyOutOfRange);
  after = h.engine.submit_survey(id, {4, 5, 3, 2});
  CHECK(after.survey == SurveyResponse{4, 5, 3, 2});
  CHECK(error_code([&] { h.engine.submit_survey(id, {4, 5, 3, 2}); }) == Errc::kAlreadySurveyed);
  CHECK(error_code([&] { h.engine.get("s-999999"); }) == Errc::kUnknownSession);

  CHECK(replay(h.log.snapshot()) == h.engine.sessions());
}

TEST_CASE("suggestions are deterministic for a fixed seed") {
  Harness a;
  Harness b;
  const auto sa = a.engine.create_session();
  const auto sb = b.engine.create_session();
  REQUIRE(sa.arm == sb.arm);
  const auto ra = a.engine.record_suggestion_round(sa.session_id, "The [wave] crashed.");
  const auto rb = b.engine.record_suggestion_round(sb.session_id, "The [wave] crashed.");
  CHECK(ra.suggestions == rb.suggestions);
}

TEST_CASE("balanced assignment fills every image x arm cell exactly once") {
  for (std::size_t n : {1u, 2u, 5u, 17u}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      EventLog log;
      SessionEngine engine(make_pool(n), make_arms(), log, EngineOptions{{}, 60'000, seed});
      std::map<std::pair<std::string, std::string>, int> cells;
      for (std::size_t i = 0; i < 2 * n; ++i) {
        const auto s = engine.create_session();
        ++cells[{s.task.task_id, s.arm}];
        // Never more than one session apart between the arms of an image.
        const int ca = cells[{s.task.task_id, "cra"}];
        const int cb = cells[{s.task.task_id, "baseline"}];
        CHECK(std::abs(ca - cb) <= 1);
      }
      CHECK(cells.size() == 2 * n);
      for (const auto& [cell, count] : cells) CHECK(count == 1);
      CHECK(error_code([&] { engine.create_session(); }) == Errc::kPoolExhausted);
    }
  }
}

TEST_CASE("assigner prefers uneven images") {
  BalancedAssigner a(1);
  const CellCounts counts = {{1, 1}, {0, 1}, {0, 0}};
  for (std::uint64_t d = 0; d < 50; ++d) {
    const auto p = a.pick(counts, d);
    REQUIRE(p);
    CHECK(p->task == 1);
    CHECK(p->arm == 0);
  }
  CHECK_FALSE(a.pick({{1, 1}}, 0));
}

TEST_CASE("idle sessions expire and free their cell") {
  Harness h(1, {}, 10'000);
  const auto s1 = h.engine.create_session();
  const auto s2 = h.engine.create_session();
  CHECK(error_code([&] { h.engine.create_session(); }) == Errc::kPoolExhausted);
  CHECK(h.engine.expire_idle() == 0);
  h.now += 60'000;
  CHECK(h.engine.expire_idle() == 2);
  CHECK(h.engine.get(s1.session_id).state == SessionState::kClosed);
  CHECK(error_code([&] { h.engine.record_suggestion_round(s2.session_id, "a [b]"); }) ==
        Errc::kSessionNotActive);
  const auto s3 = h.engine.create_session();
  CHECK(s3.session_id != s1.session_id);
  CHECK(replay(h.log.snapshot()) == h.engine.sessions());
}

TEST_CASE("file-backed log resumes after restart") {
  TempDir dir("session-log");
  const auto path = dir / "events.jsonl";
  SessionMap before;
  std::string first_id;
  {
    EventLog log(path);
    SessionEngine engine(make_pool(3), make_arms(), log);
    first_id = engine.create_session().session_id;
    engine.record_suggestion_round(first_id, "The [sun] set.");
    engine.create_session();
    before = engine.sessions();
  }
  EventLog log(path);
  SessionEngine engine(make_pool(3), make_arms(), log);
  CHECK(engine.sessions() == before);
  const auto third = engine.create_session();
  CHECK(before.count(third.session_id) == 0);
  CHECK(read_event_log_file(path).size() == 5);
  CHECK(log.next_event_id() == 6);

  // A torn final line is reported, not silently dropped.
  const auto text = read_file(path);
  milrw::testing::write_file(path, text.substr(0, text.size() - 3));
  CHECK(error_code([&] { EventLog reopened(path); }) == Errc::kCorruptLog);
}

TEST_CASE("replay rejects illegal sequences with the log line") {
  std::vector<InteractionEvent> events = {
      {1, "s-1", 0, event::SessionCreated{{"t", "i", "p", {}}, "cra"}},
      {2, "s-1", 0, event::DecisionMade{"s-1-r1", Decision::reject()}},
  };
  try {
    replay(std::span<const InteractionEvent>(events));
    FAIL("expected CorruptLog");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kCorruptLog);
    CHECK(e.line == 3u);
  }
  SessionMap m;
  CHECK(error_code([&] { apply_event(m, events[1]); }) == Errc::kUnknownSession);
  CHECK(m.empty());
  apply_event(m, events[0]);
  CHECK(error_code([&] { apply_event(m, events[0]); }) == Errc::kInvalidRecord);
}

TEST_CASE("fuzzed operation traces replay to the live state") {
  std::mt19937_64 rng(20261017);
  std::size_t ops_total = 0;
  std::size_t errors_total = 0;
  for (int trace = 0; trace < 500; ++trace) {
    Harness h(1 + rng() % 3, {20, 1 + rng() % 3}, 30'000);
    std::vector<std::string> ids;
    const int ops = 5 + static_cast<int>(rng() % 40);
    for (int op = 0; op < ops; ++op) {
      ++ops_total;
      const auto kind = rng() % 10;
      const std::string id = ids.empty() || rng() % 20 == 0
                                 ? std::string("s-unknown")
                                 : ids[rng() % ids.size()];
      try {
        if (kind == 0 || ids.empty()) {
          ids.push_back(h.engine.create_session().session_id);
        } else if (kind <= 3) {
          h.engine.record_suggestion_round(id, milrw::testing::random_valid_markup(rng).raw);
        } else if (kind <= 5) {
          const auto s = h.engine.get(id);
          std::string rid = s.rounds.empty() || rng() % 10 == 0
                                ? id + "-r99"
                                : s.rounds[rng() % s.rounds.size()].request_id;
          const auto d = rng() % 2 ? Decision::accept(rng() % 4) : Decision::reject();
          h.engine.record_decision(id, rid, d);
        } else if (kind == 6) {
          h.engine.edit_draft(id, milrw::testing::random_valid_markup(rng).raw);
        } else if (kind == 7) {
          h.engine.submit_caption(id, std::string(10 + rng() % 20, 'c'));
        } else if (kind == 8) {
          const int base = static_cast<int>(rng() % 6);
          h.engine.submit_survey(id, {base, 1 + base % 5, 3, 2});
        } else {
          h.now += static_cast<std::int64_t>(rng() % 50'000);
          h.engine.expire_idle();
        }
      } catch (const Error&) {
        ++errors_total;
      }
    }
    const auto live = h.engine.sessions();
    const auto text = h.log.snapshot();
    REQUIRE(replay(text) == live);
    // Every line-boundary prefix is a valid log.
    const auto cut = rng() % (text.size() + 1);
    REQUIRE_NOTHROW(replay(h.log.snapshot(cut)));
  }
  // Both paths were exercised.
  CHECK(errors_total > 0);
  CHECK(errors_total < ops_total);
}

TEST_CASE("concurrent rounds on different sessions") {
  Harness h(8);
  std::vector<std::string> ids;
  for (int i = 0; i < 8; ++i) ids.push_back(h.engine.create_session().session_id);
  std::vector<std::thread> threads;
  for (const auto& id : ids) {
    threads.emplace_back([&h, id] {
      for (int r = 0; r < 5; ++r) {
        const auto set = h.engine.record_suggestion_round(id, "The [river] ran ___ home.");
        h.engine.record_decision(id, set.request_id, Decision::accept(r % 3));
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& id : ids) CHECK(h.engine.get(id).request_count == 5);
  CHECK(replay(h.log.snapshot()) == h.engine.sessions());
}
