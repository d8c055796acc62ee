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

#include <sys/wait.h>

#include <cstdlib>
#include <set>

#include "doctest.h"
#include "e2e_client.hpp"
#include "milrw/error.hpp"
#include "support.hpp"

using namespace milrw;
using milrw::testing::e2e_config;
using milrw::testing::e2e_pool;
using milrw::testing::read_file;
using milrw::testing::source_path;
using milrw::testing::TempDir;
using nlohmann::json;

namespace {

struct InProcess {
  explicit InProcess(std::size_t images = 2, ServiceConfig cfg = e2e_config())
      : service(cfg, e2e_pool(images, cfg.constraints), build_arms(cfg.arms),
                [this] { return now += 1000; }) {}
  std::int64_t now = 1'000'000;
  Service service;

  HttpResponse post(const std::string& path, const json& body = json::object()) {
    return service.handle({"POST", path, {}, {}, body.dump()});
  }
  HttpResponse get(const std::string& path, std::map<std::string, std::string> headers = {},
                   std::map<std::string, std::string> query = {}) {
    return service.handle({"GET", path, std::move(query), std::move(headers), ""});
  }
  std::string create() { return json::parse(post("/sessions").body).at("session_id"); }
};

std::string code(const HttpResponse& r) { return json::parse(r.body).value("code", ""); }

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(MILRW_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const std::string kCaption(130, 'w');

}  // namespace

TEST_CASE("http status mapping") {
  CHECK(http_status(Errc::kNestedBrackets) == 400);
  CHECK(http_status(Errc::kNoDemarcations) == 400);
  CHECK(http_status(Errc::kBadIndex) == 400);
  CHECK(http_status(Errc::kUnknownSession) == 404);
  CHECK(http_status(Errc::kUnknownRequest) == 404);
  CHECK(http_status(Errc::kPoolExhausted) == 409);
  CHECK(http_status(Errc::kAlreadyDecided) == 409);
  CHECK(http_status(Errc::kSessionNotActive) == 409);
  CHECK(http_status(Errc::kTooShort) == 422);
  CHECK(http_status(Errc::kTooFewRequests) == 422);
  CHECK(http_status(Errc::kSurveyOutOfRange) == 422);
  CHECK(http_status(Errc::kBackendUnavailable) == 502);
  CHECK(http_status(Errc::kMalformedResponse) == 502);
  CHECK(http_status(Errc::kIoError) == 500);
}

TEST_CASE("config file parsing and validation") {
  const auto cfg = ServiceConfig::from_file(source_path("data/service.example.json"));
  CHECK(cfg.arms.size() == 2);
  CHECK(cfg.task_pool == source_path("data/tasks.json"));
  CHECK(cfg.constraints.min_caption_chars == 100);
  CHECK_NOTHROW(cfg.validate());
  CHECK(load_task_pool(cfg.task_pool, cfg.constraints).size() == 6);

  auto one_arm = cfg;
  one_arm.arms.pop_back();
  CHECK(milrw::testing::error_code([&] { one_arm.validate(); }) == Errc::kInvalidConfig);
  one_arm.ab_mode = false;
  CHECK_NOTHROW(one_arm.validate());

  CHECK(milrw::testing::error_code([] {
          ServiceConfig::from_json(json::parse(R"({"arms":[{"name":"a","backend":{"type":"gpu"}}]})"));
        }) == Errc::kInvalidConfig);
  CHECK(milrw::testing::error_code([] { parse_task_pool(json::parse(R"([{"task_id":"x"}])"), {}); }) ==
        Errc::kInvalidConfig);

  ::setenv("MILRW_LISTEN", "0.0.0.0:9999", 1);
  ::setenv("MILRW_ADMIN_TOKEN", "from-env", 1);
  auto env = cfg;
  env.apply_env_overrides();
  CHECK(env.listen == "0.0.0.0:9999");
  CHECK(env.admin_token == "from-env");
  ::unsetenv("MILRW_LISTEN");
  ::unsetenv("MILRW_ADMIN_TOKEN");
}

TEST_CASE("session creation fills a two-image pool then conflicts") {
  InProcess h(2);
  std::map<std::string, int> per_image;
  for (int i = 0; i < 4; ++i) {
    const auto r = h.post("/sessions");
    REQUIRE(r.status == 200);
    const auto j = json::parse(r.body);
    CHECK_FALSE(j.contains("arm"));
    CHECK(j.at("constraints").at("min_requests") == 2);
    ++per_image[j.at("task").at("image_ref")];
  }
  CHECK(per_image.size() == 2);
  for (const auto& [img, n] : per_image) CHECK(n == 2);
  // Both sessions for an image landed on different arms.
  std::map<std::string, std::set<std::string>> arms_by_image;
  for (const auto& [id, s] : h.service.engine().sessions()) arms_by_image[s.task.image_ref].insert(s.arm);
  for (const auto& [img, set] : arms_by_image) CHECK(set.size() == 2);
  const auto fifth = h.post("/sessions");
  CHECK(fifth.status == 409);
  CHECK(code(fifth) == "POOL_EXHAUSTED");
}

TEST_CASE("suggest, decide and gate through the handler") {
  InProcess h;
  const auto id = h.create();
  const std::string base = "/sessions/" + id;

  auto r = h.post(base + "/suggest", {{"raw_draft", "no markup here"}});
  CHECK(r.status == 400);
  CHECK(code(r) == "NO_DEMARCATIONS");
  CHECK(h.post(base + "/suggest", {{"raw_draft", "a [b [c]]"}}).status == 400);
  CHECK(h.post(base + "/suggest", json::object()).status == 400);
  CHECK(h.service.handle({"POST", base + "/suggest", {}, {}, "{not json"}).status == 400);
  CHECK(h.post("/sessions/s-nope/suggest", {{"raw_draft", "a [b]"}}).status == 404);

  r = h.post(base + "/suggest", {{"raw_draft", "The [wave] crashed."}});
  REQUIRE(r.status == 200);
  const auto j = json::parse(r.body);
  CHECK(j.at("suggestions").size() == 3);
  const std::string rid = j.at("request_id");

  const auto view = json::parse(h.get(base).body);
  CHECK(view.at("pending").at("request_id") == rid);
  CHECK_FALSE(view.contains("arm"));

  CHECK(h.post(base + "/decision", {{"request_id", rid}, {"action", "accept"}, {"index", 5}}).status == 400);
  CHECK(h.post(base + "/decision", {{"request_id", rid}, {"action", "accept"}, {"index", -1}}).status == 400);
  CHECK(h.post(base + "/decision", {{"request_id", rid}, {"action", "maybe"}}).status == 400);
  CHECK(h.post(base + "/decision", {{"request_id", "zzz"}, {"action", "reject"}}).status == 404);
  r = h.post(base + "/decision", {{"request_id", rid}, {"action", "accept"}, {"index", 2}});
  REQUIRE(r.status == 200);
  CHECK(json::parse(r.body).at("current_draft") == j.at("suggestions").at(2));
  CHECK(h.post(base + "/decision", {{"request_id", rid}, {"action", "reject"}}).status == 409);

  r = h.post(base + "/submit", {{"caption", kCaption}});
  CHECK(r.status == 422);
  const auto body = json::parse(r.body);
  CHECK(body.at("code") == "TOO_FEW_REQUESTS");
  CHECK(body.at("actual") == 1);
  CHECK(body.at("required") == 2);

  r = h.post(base + "/draft", {{"draft", "My [own] words ___ here."}});
  CHECK(json::parse(r.body).at("current_draft") == "My [own] words ___ here.");
  CHECK(h.post(base + "/suggest", {{"raw_draft", "My [own] words ___ here."}}).status == 200);
  r = h.post(base + "/submit", {{"caption", "too short"}});
  CHECK(r.status == 422);
  CHECK(code(r) == "TOO_SHORT");

  CHECK(h.post(base + "/survey", {{"helpfulness", 3}, {"grammaticality", 3}, {"satisfaction", 3}, {"self_skill", 3}}).status == 409);
  CHECK(h.post(base + "/submit", {{"caption", kCaption}}).status == 200);
  CHECK(h.post(base + "/suggest", {{"raw_draft", "a [b]"}}).status == 409);
  r = h.post(base + "/survey", {{"helpfulness", 9}, {"grammaticality", 3}, {"satisfaction", 3}, {"self_skill", 3}});
  CHECK(r.status == 422);
  CHECK(code(r) == "SURVEY_OUT_OF_RANGE");
  CHECK(h.post(base + "/survey", {{"helpfulness", 4}, {"grammaticality", 3}, {"satisfaction", 3}, {"self_skill", 3}}).status == 200);
  CHECK(h.post(base + "/survey", {{"helpfulness", 4}, {"grammaticality", 3}, {"satisfaction", 3}, {"self_skill", 3}}).status == 409);

  CHECK(h.get("/nowhere").status == 404);
  CHECK(h.get("/health").status == 200);
  CHECK(h.service.handle({"GET", "/sessions", {}, {}, ""}).status == 405);
}

TEST_CASE("backend failures return a generic 502") {
  auto cfg = e2e_config();
  cfg.arms[0].backend.type = BackendSpec::Type::kHttp;
  cfg.arms[0].backend.url = "http://127.0.0.1:1/generate";
  cfg.arms[0].backend.timeout_ms = 200;
  cfg.arms[1] = cfg.arms[0];
  cfg.arms[1].name = milrw::testing::kArmB;
  InProcess h(1, cfg);
  const auto id = h.create();
  const auto r = h.post("/sessions/" + id + "/suggest", {{"raw_draft", "The [wave]."}});
  CHECK(r.status == 502);
  CHECK(r.body.find("127.0.0.1") == std::string::npos);
  CHECK(r.body.find(milrw::testing::kArmA) == std::string::npos);
  CHECK(h.service.engine().get(id).request_count == 0);
}

TEST_CASE("admin endpoints") {
  InProcess h;
  const auto id = h.create();
  const auto s = json::parse(h.post("/sessions/" + id + "/suggest", {{"raw_draft", "The [wave] crashed."}}).body);
  h.post("/sessions/" + id + "/decision", {{"request_id", s.at("request_id")}, {"action", "accept"}, {"index", 0}});

  CHECK(h.get("/admin/snapshot").status == 401);
  CHECK(h.get("/admin/snapshot", {{"authorization", "Bearer wrong"}}).status == 401);
  const std::map<std::string, std::string> bearer = {{"authorization", std::string("Bearer ") + milrw::testing::kAdminToken}};
  const std::map<std::string, std::string> xtoken = {{"x-admin-token", milrw::testing::kAdminToken}};
  CHECK(h.get("/admin/snapshot", xtoken).status == 200);

  const auto size_before = h.service.log().size_bytes();
  const auto snap1 = h.get("/admin/snapshot", bearer);
  const auto snap2 = h.get("/admin/snapshot", bearer);
  const auto view1 = h.get("/sessions/" + id);
  const auto view2 = h.get("/sessions/" + id);
  CHECK(snap1.body == snap2.body);
  CHECK(view1.body == view2.body);
  CHECK(json::parse(snap1.body).at("sessions").contains(id));

  const auto events = h.get("/admin/export/events", bearer);
  CHECK(events.body == h.service.log().snapshot());
  CHECK(replay(events.body) == h.service.engine().sessions());

  const auto fb = h.get("/admin/export/feedback", bearer);
  REQUIRE(fb.status == 200);
  CHECK(std::count(fb.body.begin(), fb.body.end(), '\n') == 1);
  // No base corpus configured: mixing has nothing to draw from.
  CHECK(h.get("/admin/export/feedback", bearer, {{"ratio", "1.0"}}).status == 422);
  CHECK(h.get("/admin/export/feedback", bearer, {{"ratio", "abc"}}).status == 400);

  const auto report = json::parse(h.get("/admin/report", bearer).body);
  CHECK(report.at("session_ids") == json::array({id}));
  CHECK(h.get("/admin/report", bearer, {{"format", "text"}}).content_type == "text/plain");
  CHECK(h.service.log().size_bytes() == size_before);

  auto no_admin = e2e_config();
  no_admin.admin_token.clear();
  InProcess locked(1, no_admin);
  CHECK(locked.get("/admin/snapshot", {{"authorization", "Bearer "}}).status == 401);
}

TEST_CASE("feedback export mixes with the configured base corpus") {
  auto cfg = e2e_config();
  cfg.base_corpus = source_path("data/fixtures/feedback_base.jsonl");
  InProcess h(1, cfg);
  const auto id = h.create();
  for (int i = 0; i < 3; ++i) {
    const auto s = json::parse(h.post("/sessions/" + id + "/suggest", {{"raw_draft", "The [wave] crashed."}}).body);
    h.post("/sessions/" + id + "/decision", {{"request_id", s.at("request_id")}, {"action", i ? "reject" : "accept"}, {"index", 0}});
  }
  const std::map<std::string, std::string> bearer = {{"authorization", std::string("Bearer ") + milrw::testing::kAdminToken}};
  const auto r = h.get("/admin/export/feedback", bearer, {{"ratio", "1.0"}, {"seed", "3"}});
  REQUIRE(r.status == 200);
  CHECK(std::count(r.body.begin(), r.body.end(), '\n') == 6);
}

TEST_CASE("idle sessions close on the next write") {
  auto cfg = e2e_config();
  cfg.idle_timeout_ms = 5000;
  InProcess h(1, cfg);
  const auto id = h.create();
  h.now += 60'000;
  const auto before = h.get("/sessions/" + id);
  CHECK(json::parse(before.body).at("state") == "active");
  h.post("/sessions");
  CHECK(json::parse(h.get("/sessions/" + id).body).at("state") == "closed");
  CHECK(h.post("/sessions/" + id + "/suggest", {{"raw_draft", "a [b]"}}).status == 409);
}

TEST_CASE("end-to-end scripted client against a live server") {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> first;
  for (int run = 0; run < 2; ++run) {
    milrw::testing::LiveServer server(e2e_config(), 2);
    const auto out = milrw::testing::run_e2e_script(server.port());
    CHECK(out.first_suggest_status == 200);
    CHECK(out.first_suggestions.size() == 3);
    CHECK(out.early_submit_status == 422);
    CHECK(out.early_submit_code == "TOO_FEW_REQUESTS");
    CHECK(out.submit_status == 200);
    CHECK(out.survey_status == 200);
    CHECK(out.report_status == 200);
    CHECK(out.report_has_session);
    for (const auto& e : out.client_log) {
      CHECK(e.body.find(milrw::testing::kArmA) == std::string::npos);
      CHECK(e.body.find(milrw::testing::kArmB) == std::string::npos);
      CHECK(e.body.find("stub-") == std::string::npos);
    }
    if (run == 0) first = out.first_suggestions;
    else CHECK(out.first_suggestions == first);
  }
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
}

TEST_CASE("live server fills every cell and never reveals the arm") {
  constexpr std::size_t kImages = 4;
  milrw::testing::LiveServer server(e2e_config(), kImages);
  milrw::testing::ScriptedClient client(server.port());
  for (std::size_t i = 0; i < 2 * kImages; ++i) {
    const auto r = client.post("/sessions", json::object());
    REQUIRE(r.status == 200);
    const std::string id = json::parse(r.body).at("session_id");
    client.post("/sessions/" + id + "/suggest", {{"raw_draft", "The [sea] was ___ calm."}});
    client.get("/sessions/" + id);
  }
  CHECK(client.post("/sessions", json::object()).status == 409);
  std::set<std::pair<std::string, std::string>> cells;
  for (const auto& [id, s] : server.service().engine().sessions()) cells.insert({s.task.task_id, s.arm});
  CHECK(cells.size() == 2 * kImages);
  for (const auto& e : client.client_log()) {
    CHECK(e.body.find(milrw::testing::kArmA) == std::string::npos);
    CHECK(e.body.find(milrw::testing::kArmB) == std::string::npos);
  }
}

TEST_CASE("replay-validate CLI") {
  TempDir dir("replay");
  const auto text = read_file(source_path("data/fixtures/arm_events.jsonl"));
  const auto good = (dir / "good.jsonl").string();
  milrw::testing::write_file(good, text);
  CHECK(run_cli("replay-validate --log " + good) == 0);

  // Line-boundary prefixes are valid logs.
  std::size_t cuts = 0;
  for (std::size_t pos = text.find('\n'); pos != std::string::npos && cuts < 25;
       pos = text.find('\n', pos + 1 + text.size() / 30)) {
    milrw::testing::write_file(dir / "prefix.jsonl", text.substr(0, pos + 1));
    CHECK(run_cli("replay-validate --log " + (dir / "prefix.jsonl").string()) == 0);
    ++cuts;
  }
  CHECK(cuts > 10);

  milrw::testing::write_file(dir / "torn.jsonl", text.substr(0, text.size() - 10));
  CHECK(run_cli("replay-validate --log " + (dir / "torn.jsonl").string()) == 2);

  // Snapshot divergence.
  const auto sessions = replay(text);
  json snap = {{"sessions", json::object()}};
  std::uint64_t last = 0;
  for (const auto& [id, s] : sessions) {
    snap["sessions"][id] = to_json(s);
    last = std::max(last, s.last_event_id);
  }
  snap["last_event_id"] = last;
  milrw::testing::write_file(dir / "snap.json", snap.dump());
  CHECK(run_cli("replay-validate --log " + good + " --snapshot " + (dir / "snap.json").string()) == 0);
  snap["sessions"].begin()->at("request_count") = 999;
  milrw::testing::write_file(dir / "bad.json", snap.dump());
  CHECK(run_cli("replay-validate --log " + good + " --snapshot " + (dir / "bad.json").string()) == 3);
}

TEST_CASE("serve CLI starts from the example config") {
  TempDir dir("serve");
  auto j = json::parse(read_file(source_path("data/service.example.json")));
  j["task_pool"] = source_path("data/tasks.json").string();
  j["event_log"] = (dir / "events.jsonl").string();
  j["base_corpus"] = "";
  milrw::testing::write_file(dir / "cfg.json", j.dump());
  const auto cfg = ServiceConfig::from_file(dir / "cfg.json");
  auto listen_cfg = cfg;
  listen_cfg.listen = "127.0.0.1:0";
  Service svc(listen_cfg);
  const int port = svc.bind();
  std::thread t([&] { svc.run(50); });
  svc.wait_ready();
  httplib::Client c("127.0.0.1", port);
  auto r = c.Post("/sessions", "{}", "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  svc.stop();
  t.join();
  CHECK(read_event_log_file(dir / "events.jsonl").size() == 1);
}
