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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "milrw/error.hpp"
#include "milrw/feedback.hpp"
#include "milrw/generation.hpp"
#include "milrw/session.hpp"

namespace milrw {

struct BackendSpec {
  enum class Type { kStub, kHttp };
  Type type = Type::kStub;
  // stub
  std::uint64_t seed = 0;
  StubMode mode = StubMode::kRewrite;
  std::filesystem::path lexicon;  // empty: built-in
  // http
  std::string url;
  std::int64_t timeout_ms = 10000;
};

struct ArmSpec {
  std::string name;
  BackendSpec backend;
};

struct ServiceConfig {
  std::string listen = "127.0.0.1:8080";
  std::filesystem::path task_pool;
  std::vector<ArmSpec> arms;
  GenerationConfig generation;
  SessionConstraints constraints;
  std::filesystem::path event_log;  // empty: in-memory
  std::string admin_token;          // empty: admin endpoints disabled
  bool ab_mode = true;              // requires exactly two arms
  std::int64_t idle_timeout_ms = 2 * 60 * 60 * 1000;
  std::uint64_t assignment_seed = 0;
  std::filesystem::path base_corpus;  // feedback mixing source
  FeedbackOptions feedback;

  // Relative paths resolve against `base_dir`. Throws kInvalidConfig.
  static ServiceConfig from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {});
  static ServiceConfig from_file(const std::filesystem::path& path);
  // MILRW_LISTEN and MILRW_ADMIN_TOKEN.
  void apply_env_overrides();
  void validate() const;
};

// JSON array of {"task_id", "image_ref", "prompt_text"}; `constraints`
// apply to every task.
std::vector<Task> parse_task_pool(const nlohmann::json& j, const SessionConstraints& constraints);
std::vector<Task> load_task_pool(const std::filesystem::path& path,
                                 const SessionConstraints& constraints);

std::vector<Arm> build_arms(const std::vector<ArmSpec>& specs);

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Maps an error code to its HTTP status.
int http_status(Errc code);

class Service {
 public:
  explicit Service(const ServiceConfig& config);
  Service(const ServiceConfig& config, std::vector<Task> pool, std::vector<Arm> arms,
          Clock clock = system_clock_ms);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Transport-independent entry point; the HTTP server forwards here.
  HttpResponse handle(const HttpRequest& request);

  // Binds host:port from the config (port 0 picks a free one) and returns
  // the bound port.
  int bind();
  // Serves until stop(); also closes idle sessions every `sweep_ms`.
  void run(std::int64_t sweep_ms = 60000);
  // Blocks until run() is accepting connections.
  void wait_ready();
  void stop();

  SessionEngine& engine();
  const EventLog& log() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace milrw
