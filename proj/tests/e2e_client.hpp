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

// Scripted client for a live stub-backed server. Shared by the service
// tests and the acceptance binary.

#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "milrw/service.hpp"

namespace milrw::testing {

// Arm names that cannot occur by accident in captions or suggestions.
inline constexpr const char* kArmA = "arm-q7x1";
inline constexpr const char* kArmB = "arm-z4k9";
inline constexpr const char* kAdminToken = "e2e-secret";

inline ServiceConfig e2e_config(std::uint64_t seed = 17) {
  ServiceConfig cfg;
  cfg.listen = "127.0.0.1:0";
  cfg.admin_token = kAdminToken;
  cfg.generation.seed = seed;
  cfg.constraints = {100, 2};
  ArmSpec a{kArmA, {}};
  a.backend.seed = 5;
  a.backend.mode = StubMode::kRewrite;
  ArmSpec b{kArmB, {}};
  b.backend.seed = 5;
  b.backend.mode = StubMode::kInfillOnly;
  cfg.arms = {a, b};
  return cfg;
}

inline std::vector<Task> e2e_pool(std::size_t n, const SessionConstraints& c = {100, 2}) {
  std::vector<Task> pool;
  for (std::size_t i = 0; i < n; ++i) {
    pool.push_back({"img-" + std::to_string(i), "images/img-" + std::to_string(i) + ".jpg",
                    "Write a creative caption.", c});
  }
  return pool;
}

// Runs a Service on an ephemeral port for the lifetime of the object.
class LiveServer {
 public:
  explicit LiveServer(const ServiceConfig& cfg, std::size_t images = 2)
      : service_(cfg, e2e_pool(images, cfg.constraints), build_arms(cfg.arms)) {
    port_ = service_.bind();
    thread_ = std::thread([this] { service_.run(50); });
    service_.wait_ready();
  }
  ~LiveServer() {
    service_.stop();
    thread_.join();
  }
  int port() const { return port_; }
  Service& service() { return service_; }

 private:
  Service service_;
  int port_ = 0;
  std::thread thread_;
};

struct Exchange {
  std::string method;
  std::string path;
  int status = 0;
  std::string body;
};

class ScriptedClient {
 public:
  explicit ScriptedClient(int port) : client_("127.0.0.1", port) {
    client_.set_read_timeout(std::chrono::seconds(5));
  }

  Exchange post(const std::string& path, const nlohmann::json& body) {
    auto res = client_.Post(path, body.dump(), "application/json");
    return record("POST", path, res);
  }
  Exchange get(const std::string& path, bool admin = false) {
    httplib::Headers h;
    if (admin) h.emplace("Authorization", std::string("Bearer ") + kAdminToken);
    auto res = client_.Get(path, h);
    return record("GET", path, res);
  }

  // Every response seen by the client, admin responses excluded.
  const std::vector<Exchange>& client_log() const { return client_log_; }

 private:
  Exchange record(const std::string& method, const std::string& path, const httplib::Result& res) {
    Exchange e{method, path, res ? res->status : -1, res ? res->body : std::string()};
    if (path.rfind("/admin", 0) != 0) client_log_.push_back(e);
    return e;
  }

  httplib::Client client_;
  std::vector<Exchange> client_log_;
};

struct E2eOutcome {
  std::string session_id;
  std::vector<std::string> first_suggestions;
  int first_suggest_status = 0;
  int early_submit_status = 0;
  std::string early_submit_code;
  int submit_status = 0;
  int survey_status = 0;
  int report_status = 0;
  bool report_has_session = false;
  std::vector<Exchange> client_log;
};

inline E2eOutcome run_e2e_script(int port) {
  ScriptedClient c(port);
  E2eOutcome out;
  const auto created = c.post("/sessions", nlohmann::json::object());
  if (created.status != 200) return out;
  out.session_id = nlohmann::json::parse(created.body).at("session_id");
  const std::string base = "/sessions/" + out.session_id;

  const auto s1 = c.post(base + "/suggest", {{"raw_draft", "A [wave] crashes over the ___ rocks at dusk."}});
  out.first_suggest_status = s1.status;
  if (s1.status != 200) return out;
  const auto j1 = nlohmann::json::parse(s1.body);
  out.first_suggestions = j1.at("suggestions").get<std::vector<std::string>>();
  c.post(base + "/decision", {{"request_id", j1.at("request_id")}, {"action", "accept"}, {"index", 0}});

  const std::string caption =
      "A towering wall of water folds over the black rocks at dusk, and the spray hangs in the "
      "air like a held breath over the harbor.";
  const auto early = c.post(base + "/submit", {{"caption", caption}});
  out.early_submit_status = early.status;
  out.early_submit_code = nlohmann::json::parse(early.body).value("code", "");

  const auto s2 = c.post(base + "/suggest", {{"raw_draft", "The [spray] hangs in the air."}});
  if (s2.status == 200) {
    const auto j2 = nlohmann::json::parse(s2.body);
    c.post(base + "/decision", {{"request_id", j2.at("request_id")}, {"action", "reject"}});
  }
  c.get(base);
  out.submit_status = c.post(base + "/submit", {{"caption", caption}}).status;
  out.survey_status = c.post(base + "/survey", {{"helpfulness", 4},
                                                {"grammaticality", 5},
                                                {"satisfaction", 4},
                                                {"self_skill", 3}})
                          .status;
  const auto report = c.get("/admin/report", true);
  out.report_status = report.status;
  if (report.status == 200) {
    const auto ids = nlohmann::json::parse(report.body).at("session_ids");
    out.report_has_session = std::find(ids.begin(), ids.end(), out.session_id) != ids.end();
  }
  out.client_log = c.client_log();
  return out;
}

}  // namespace milrw::testing
