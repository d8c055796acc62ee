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

// Regenerates the bundled fixtures under data/fixtures. Output is fully
// deterministic (fixed seeds and a fake clock), so rerunning it must
// reproduce the checked-in files byte for byte.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "milrw/corpus.hpp"
#include "milrw/error.hpp"
#include "milrw/events.hpp"
#include "milrw/markup.hpp"
#include "milrw/session.hpp"
#include "milrw/text.hpp"

namespace {

using namespace milrw;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::int64_t kEpochMs = 1767225600000;  // 2026-01-01T00:00:00Z

const std::vector<std::string> kOpeners = {
    "A [wave] rolls toward the quiet beach under a pale sky.",
    "An old [tree] leans over the river near the stone bridge.",
    "The [city] glows beneath the clouds as the night settles in.",
    "A small [boat] drifts across the sea toward the far mountains.",
    "Children play in the [field] while a dog runs beside them.",
    "The [moon] rises over the snow and the sleeping forest.",
    "A woman walks down the [street] carrying bright flowers.",
    "Rain falls on the [garden] where birds gather near the house.",
};

const std::string kPadding = " The scene holds still for a moment, and every small detail seems to glow.";

class FakeClock {
 public:
  std::int64_t operator()() { return kEpochMs + 1000 * static_cast<std::int64_t>(ticks_++); }

 private:
  std::uint64_t ticks_ = 0;
};

std::vector<Task> make_pool(std::size_t n) {
  std::vector<Task> pool;
  for (std::size_t i = 1; i <= n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "img-%03zu", i);
    pool.push_back({id, std::string("images/") + id + ".jpg",
                    "Write a creative caption of at least 100 characters for this image.",
                    SessionConstraints{}});
  }
  return pool;
}

// Brackets the round-th eligible word of a plain draft.
std::string demarcate(const std::string& plain, std::size_t round) {
  std::vector<Word> eligible;
  for (const auto& w : split_words(plain)) {
    if (w.key.size() >= 4) eligible.push_back(w);
  }
  if (eligible.empty()) return "[" + plain + "]";
  const auto& w = eligible[(round * 3) % eligible.size()];
  std::size_t b = w.range.begin;
  std::size_t e = w.range.end;
  while (e > b && std::ispunct(static_cast<unsigned char>(plain[e - 1]))) --e;
  return plain.substr(0, b) + "[" + plain.substr(b, e - b) + "]" + plain.substr(e);
}

struct Plan {
  std::size_t requests = 2;
  std::vector<bool> accepts;  // one per request
  std::optional<SurveyResponse> survey;
};

// Spreads `accepts` accept decisions evenly over `total` rounds.
std::vector<bool> spread(std::size_t total, std::size_t accepts) {
  std::vector<bool> out(total);
  for (std::size_t j = 0; j < total; ++j) out[j] = (j + 1) * accepts / total > j * accepts / total;
  return out;
}

void run_session(SessionEngine& engine, const std::string& id, const Plan& plan,
                 std::size_t opener) {
  std::string raw = kOpeners[opener % kOpeners.size()];
  for (std::size_t r = 0; r < plan.requests; ++r) {
    if (r > 0) raw = demarcate(parse_markup(engine.get(id).current_draft).plain_text(), r);
    const auto set = engine.record_suggestion_round(id, raw);
    const auto d = plan.accepts[r] ? Decision::accept(r % set.suggestions.size()) : Decision::reject();
    engine.record_decision(id, set.request_id, d);
  }
  std::string caption = parse_markup(engine.get(id).current_draft).plain_text();
  while (utf8_length(caption) < 100) caption += kPadding;
  engine.submit_caption(id, caption);
  if (plan.survey) engine.submit_survey(id, *plan.survey);
}

void write(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
  if (!out) fail(Errc::kIoError, "cannot write " + path.string());
  std::cout << "wrote " << path.string() << "\n";
}

std::vector<Arm> ab_arms() {
  return {{"cra", std::make_shared<StubBackend>(11, StubMode::kRewrite)},
          {"baseline", std::make_shared<StubBackend>(11, StubMode::kInfillOnly)}};
}

// Per-arm plans: CRA 141 requests / 45 accepts, baseline 151 / 37, 50 users each.
void arm_fixture(const fs::path& dir) {
  EventLog log;
  SessionEngine engine(make_pool(50), ab_arms(), log, EngineOptions{{}, 2 * 3600 * 1000, 3},
                       FakeClock{});
  std::map<std::string, std::vector<std::size_t>> requests = {
      {"cra", {}}, {"baseline", {}}};
  for (std::size_t i = 0; i < 50; ++i) requests["cra"].push_back(i < 41 ? 3 : 2);
  for (std::size_t i = 0; i < 50; ++i) requests["baseline"].push_back(i < 49 ? 3 : 4);
  std::map<std::string, std::vector<bool>> accepts = {{"cra", spread(141, 45)},
                                                      {"baseline", spread(151, 37)}};
  std::map<std::string, std::size_t> next_user, next_round;
  for (std::size_t n = 0; n < 100; ++n) {
    const auto s = engine.create_session();
    const auto u = next_user[s.arm]++;
    Plan plan;
    plan.requests = requests[s.arm][u];
    auto& flat = accepts[s.arm];
    auto& pos = next_round[s.arm];
    plan.accepts.assign(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                        flat.begin() + static_cast<std::ptrdiff_t>(pos + plan.requests));
    pos += plan.requests;
    const int base = s.arm == "cra" ? 3 : 2;
    plan.survey = SurveyResponse{base + static_cast<int>(u % 3) - 1 + (u % 7 == 0 ? 1 : 0),
                                 3 + static_cast<int>(u % 2), base + static_cast<int>(u % 2),
                                 1 + static_cast<int>(u % 5)};
    run_session(engine, s.session_id, plan, n);
  }
  write(dir / "arm_events.jsonl", log.snapshot());
}

// Novice 22 users (helpfulness sum 50, 67 requests, 20 accepts); skilled 36
// users (sum 116, 95 requests, 32 accepts). Surveys live in a separate file.
void skill_fixture(const fs::path& dir) {
  EventLog log;
  SessionEngine engine(make_pool(29), ab_arms(), log, EngineOptions{{}, 2 * 3600 * 1000, 6},
                       FakeClock{});
  std::vector<int> novice_help;
  for (auto [v, k] : {std::pair{1, 3}, {2, 11}, {3, 7}, {4, 1}}) novice_help.insert(novice_help.end(), k, v);
  std::vector<int> skilled_help;
  for (auto [v, k] : {std::pair{1, 1}, {2, 6}, {3, 16}, {4, 10}, {5, 3}}) skilled_help.insert(skilled_help.end(), k, v);
  const auto novice_accepts = spread(67, 20);
  const auto skilled_accepts = spread(95, 32);

  std::string surveys;
  std::size_t nov = 0, sk = 0, nov_round = 0, sk_round = 0;
  for (std::size_t n = 0; n < 58; ++n) {
    const auto s = engine.create_session();
    // Interleave the two groups so neither clusters on one arm.
    const bool skilled = (n % 8 >= 3 && sk < 36) || nov == 22;
    Plan plan;
    SurveyResponse survey;
    if (skilled) {
      plan.requests = sk < 23 ? 3 : 2;
      plan.accepts.assign(skilled_accepts.begin() + static_cast<std::ptrdiff_t>(sk_round),
                          skilled_accepts.begin() + static_cast<std::ptrdiff_t>(sk_round + plan.requests));
      sk_round += plan.requests;
      survey = {skilled_help[sk], 4, 4, 4 + static_cast<int>(sk % 2)};
      ++sk;
    } else {
      plan.requests = nov < 21 ? 3 : 4;
      plan.accepts.assign(novice_accepts.begin() + static_cast<std::ptrdiff_t>(nov_round),
                          novice_accepts.begin() + static_cast<std::ptrdiff_t>(nov_round + plan.requests));
      nov_round += plan.requests;
      survey = {novice_help[nov], 3, 3, 1 + static_cast<int>(nov % 3)};
      ++nov;
    }
    run_session(engine, s.session_id, plan, n);
    surveys += json{{"session_id", s.session_id},
                    {"helpfulness", survey.helpfulness},
                    {"grammaticality", survey.grammaticality},
                    {"satisfaction", survey.satisfaction},
                    {"self_skill", survey.self_skill}}
                   .dump() +
               "\n";
  }
  write(dir / "skill_events.jsonl", log.snapshot());
  write(dir / "skill_surveys.jsonl", surveys);
}

// 100 pairwise judgements, 43 won by the human-only caption and 57 by the
// human+CRA caption.
void vote_fixture(const fs::path& dir) {
  const std::vector<std::vector<std::string>> a_patterns = {
      {"A", "A", "A"}, {"A", "A", "B"}, {"A", "B", "A"}, {"B", "A", "A"}};
  const std::vector<std::vector<std::string>> b_patterns = {
      {"B", "B", "B"}, {"B", "B", "A"}, {"B", "A", "B"}, {"A", "B", "B"}};
  const auto b_wins = spread(100, 57);
  std::string out;
  for (std::size_t i = 0; i < 100; ++i) {
    char img[32];
    std::snprintf(img, sizeof img, "img-%03zu", i + 1);
    const auto& votes = b_wins[i] ? b_patterns[i % 4] : a_patterns[i % 4];
    out += json{{"image_id", img},
                {"caption_a_id", std::string(img) + "-human"},
                {"caption_b_id", std::string(img) + "-human-cra"},
                {"condition_a", "human_only"},
                {"condition_b", "human_cra"},
                {"votes", votes}}
               .dump() +
           "\n";
  }
  write(dir / "votes.jsonl", out);
}

// Helpfulness ratings for an adapted model versus the model it started
// from; the difference is not significant (p near 0.40).
void mww_fixture(const fs::path& dir) {
  const json j = {
      {"adapted", {1, 1, 1, 1, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 5}},
      {"original", {1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5}}};
  write(dir / "mww_adaptation.json", j.dump(2) + "\n");
}

// 474 decisions (300 accepts, 174 rejects) plus a 500-pair base corpus, so
// mixing 450 originals gives 924 examples.
void feedback_fixture(const fs::path& dir) {
  EventLog log;
  SessionEngine engine(make_pool(30), ab_arms(), log, EngineOptions{{}, 2 * 3600 * 1000, 9},
                       FakeClock{});
  const auto accepts = spread(474, 300);
  std::size_t pos = 0;
  for (std::size_t n = 0; n < 60; ++n) {
    const auto s = engine.create_session();
    Plan plan;
    plan.requests = n < 54 ? 8 : 7;
    plan.accepts.assign(accepts.begin() + static_cast<std::ptrdiff_t>(pos),
                        accepts.begin() + static_cast<std::ptrdiff_t>(pos + plan.requests));
    pos += plan.requests;
    run_session(engine, s.session_id, plan, n);
  }
  write(dir / "feedback_events.jsonl", log.snapshot());

  const std::vector<std::string> subjects = {"the lake", "a fox", "the tower", "an old bus", "the harbor",
                                             "a kite", "the orchard", "a lamp", "the canyon", "a violin"};
  const std::vector<std::pair<std::string, std::string>> phrases = {
      {"is calm", "is a sheet of glass"},         {"is bright", "burns like a small sun"},
      {"is quiet", "holds its breath"},          {"is old", "wears a century of dust"},
      {"is cold", "is carved from winter"},      {"moves fast", "races like a rumor"},
      {"is tall", "scrapes the belly of the sky"}, {"is empty", "echoes with absent voices"},
      {"is loud", "roars like a stadium"},       {"is soft", "is a whisper of velvet"}};
  std::string base;
  std::size_t index = 0;
  for (std::size_t round = 0; round < 5; ++round) {
    for (const auto& subj : subjects) {
      for (const auto& [plain, vivid] : phrases) {
        TrainingPair p;
        const std::string when = round == 0 ? "" : std::vector<std::string>{
            "", " at dawn", " at noon", " in the rain", " tonight"}[round];
        p.source = subj + " " + plain + when + ".";
        p.target = subj + " " + vivid + when + ".";
        p.source[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p.source[0])));
        p.target[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p.target[0])));
        p.example_type = ExampleType::kRewrite;
        p.provenance.source_id = "synthetic-base";
        p.provenance.record_index = index;
        p.split = index % 25 == 24 ? Split::kValid : Split::kTrain;
        base += to_jsonl_line(p) + "\n";
        ++index;
      }
    }
  }
  write(dir / "feedback_base.jsonl", base);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("data/fixtures");
  try {
    fs::create_directories(dir);
    arm_fixture(dir);
    skill_fixture(dir);
    vote_fixture(dir);
    mww_fixture(dir);
    feedback_fixture(dir);
  } catch (const Error& e) {
    std::cerr << "make_fixtures: " << e.name() << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
