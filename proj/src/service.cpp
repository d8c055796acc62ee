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

#include "milrw/service.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "milrw/analytics.hpp"
#include "milrw/error.hpp"
#include "milrw/markup.hpp"

namespace milrw {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::pair<std::string, int> split_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) fail(Errc::kInvalidConfig, "listen must be host:port");
  const std::string host = listen.substr(0, colon);
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(listen.substr(colon + 1), &used);
    if (used != listen.size() - colon - 1) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (host.empty() || port < 0 || port > 65535) {
    fail(Errc::kInvalidConfig, "listen must be host:port, got '" + listen + "'");
  }
  return {host, port};
}

HttpResponse json_response(int status, const json& body) {
  return {status, body.dump(), "application/json"};
}

HttpResponse error_response(int status, std::string_view code, const std::string& message,
                            std::optional<std::int64_t> actual = std::nullopt,
                            std::optional<std::int64_t> required = std::nullopt) {
  json body = {{"code", code}, {"message", message}};
  if (actual) body["actual"] = *actual;
  if (required) body["required"] = *required;
  return json_response(status, body);
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  return parts;
}

json parse_body(const std::string& body) {
  try {
    auto j = json::parse(body.empty() ? std::string("{}") : body);
    if (!j.is_object()) fail(Errc::kInvalidArgument, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    fail(Errc::kInvalidArgument, std::string("request body is not valid JSON: ") + e.what());
  }
}

template <class T>
T field(const json& body, const char* name) {
  auto it = body.find(name);
  if (it == body.end()) fail(Errc::kInvalidArgument, std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(Errc::kInvalidArgument, std::string("field '") + name + "' has the wrong type");
  }
}

json task_view(const Task& t) {
  return {{"image_ref", t.image_ref}, {"prompt_text", t.prompt_text}};
}

json constraints_view(const SessionConstraints& c) {
  return {{"min_caption_chars", c.min_caption_chars}, {"min_requests", c.min_requests}};
}

// Client-facing session state. Never includes the arm or backend identity.
json session_view(const Session& s) {
  json j = {{"session_id", s.session_id},
            {"state", to_string(s.state)},
            {"task", task_view(s.task)},
            {"constraints", constraints_view(s.task.constraints)},
            {"current_draft", s.current_draft},
            {"request_count", s.request_count},
            {"accepted_count", s.accepted_count},
            {"survey_submitted", s.survey.has_value()}};
  j["final_caption"] = s.final_caption ? json(*s.final_caption) : json(nullptr);
  j["pending"] = nullptr;
  if (!s.rounds.empty() && !s.rounds.back().decision) {
    j["pending"] = {{"request_id", s.rounds.back().request_id},
                    {"suggestions", s.rounds.back().suggestions}};
  }
  return j;
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  try {
    ServiceConfig c;
    c.listen = j.value("listen", c.listen);
    c.task_pool = resolve(base_dir, j.value("task_pool", std::string()));
    c.event_log = resolve(base_dir, j.value("event_log", std::string()));
    c.admin_token = j.value("admin_token", std::string());
    c.ab_mode = j.value("ab_mode", c.ab_mode);
    c.idle_timeout_ms = j.value("idle_timeout_ms", c.idle_timeout_ms);
    c.assignment_seed = j.value("assignment_seed", c.assignment_seed);
    c.base_corpus = resolve(base_dir, j.value("base_corpus", std::string()));
    if (auto g = j.find("generation"); g != j.end()) {
      c.generation.k = g->value("k", c.generation.k);
      c.generation.n_display = g->value("n_display", c.generation.n_display);
      c.generation.seed = g->value("seed", c.generation.seed);
      c.generation.temperature = g->value("temperature", c.generation.temperature);
    }
    if (auto k = j.find("constraints"); k != j.end()) {
      c.constraints.min_caption_chars =
          k->value("min_caption_chars", c.constraints.min_caption_chars);
      c.constraints.min_requests = k->value("min_requests", c.constraints.min_requests);
    }
    if (auto f = j.find("feedback"); f != j.end()) {
      c.feedback.siblings_as_rejects = f->value("siblings_as_rejects", false);
      c.feedback.reject_all_shown = f->value("reject_all_shown", false);
      c.feedback.include_closed = f->value("include_closed", false);
    }
    for (const auto& a : j.at("arms")) {
      ArmSpec arm;
      arm.name = a.at("name").get<std::string>();
      const auto& b = a.at("backend");
      const auto type = b.at("type").get<std::string>();
      if (type == "stub") {
        arm.backend.type = BackendSpec::Type::kStub;
        arm.backend.seed = b.value("seed", std::uint64_t{0});
        const auto mode = b.value("mode", std::string("rewrite"));
        if (mode == "rewrite") arm.backend.mode = StubMode::kRewrite;
        else if (mode == "infill") arm.backend.mode = StubMode::kInfillOnly;
        else fail(Errc::kInvalidConfig, "stub mode must be rewrite or infill");
        arm.backend.lexicon = resolve(base_dir, b.value("lexicon", std::string()));
      } else if (type == "http") {
        arm.backend.type = BackendSpec::Type::kHttp;
        arm.backend.url = b.at("url").get<std::string>();
        arm.backend.timeout_ms = b.value("timeout_ms", arm.backend.timeout_ms);
      } else {
        fail(Errc::kInvalidConfig, "backend type must be stub or http, got " + type);
      }
      c.arms.push_back(std::move(arm));
    }
    return c;
  } catch (const json::exception& e) {
    fail(Errc::kInvalidConfig, std::string("bad service config: ") + e.what());
  }
}

ServiceConfig ServiceConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kIoError, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::kInvalidConfig, path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void ServiceConfig::apply_env_overrides() {
  if (const char* v = std::getenv("MILRW_LISTEN"); v && *v) listen = v;
  if (const char* v = std::getenv("MILRW_ADMIN_TOKEN"); v && *v) admin_token = v;
}

void ServiceConfig::validate() const {
  split_listen(listen);
  if (arms.empty()) fail(Errc::kInvalidConfig, "at least one arm is required");
  if (ab_mode && arms.size() != 2) {
    fail(Errc::kInvalidConfig, "A/B mode needs exactly two arms, got " + std::to_string(arms.size()));
  }
  std::set<std::string> names;
  for (const auto& a : arms) {
    if (a.name.empty()) fail(Errc::kInvalidConfig, "arm name must not be empty");
    if (!names.insert(a.name).second) fail(Errc::kInvalidConfig, "duplicate arm " + a.name);
  }
  if (idle_timeout_ms <= 0) fail(Errc::kInvalidConfig, "idle_timeout_ms must be positive");
  generation.validate();
}

std::vector<Task> parse_task_pool(const json& j, const SessionConstraints& constraints) {
  if (!j.is_array()) fail(Errc::kInvalidConfig, "task pool must be a JSON array");
  std::vector<Task> pool;
  try {
    for (const auto& t : j) {
      pool.push_back({t.at("task_id").get<std::string>(), t.at("image_ref").get<std::string>(),
                      t.at("prompt_text").get<std::string>(), constraints});
    }
  } catch (const json::exception& e) {
    fail(Errc::kInvalidConfig, std::string("bad task pool: ") + e.what());
  }
  if (pool.empty()) fail(Errc::kInvalidConfig, "task pool is empty");
  return pool;
}

std::vector<Task> load_task_pool(const std::filesystem::path& path,
                                 const SessionConstraints& constraints) {
  std::ifstream in(path);
  if (!in) fail(Errc::kIoError, "cannot read task pool " + path.string());
  try {
    return parse_task_pool(json::parse(in), constraints);
  } catch (const json::exception& e) {
    fail(Errc::kInvalidConfig, path.string() + ": " + e.what());
  }
}

std::vector<Arm> build_arms(const std::vector<ArmSpec>& specs) {
  std::vector<Arm> arms;
  for (const auto& s : specs) {
    std::shared_ptr<GenerationBackend> backend;
    if (s.backend.type == BackendSpec::Type::kStub) {
      std::shared_ptr<const Lexicon> lex;
      if (!s.backend.lexicon.empty()) {
        lex = std::make_shared<const Lexicon>(Lexicon::from_file(s.backend.lexicon));
      }
      backend = std::make_shared<StubBackend>(s.backend.seed, s.backend.mode, lex);
    } else {
      backend = std::make_shared<HttpBackend>(
          s.backend.url, std::chrono::milliseconds(s.backend.timeout_ms), s.name);
    }
    arms.push_back({s.name, std::move(backend)});
  }
  return arms;
}

int http_status(Errc code) {
  switch (code) {
    case Errc::kUnbalancedBrackets:
    case Errc::kNestedBrackets:
    case Errc::kEmptyRewriteSpan:
    case Errc::kReservedMarker:
    case Errc::kNoDemarcations:
    case Errc::kBadIndex:
    case Errc::kInvalidArgument:
    case Errc::kMalformedRecord:
      return 400;
    case Errc::kUnknownSession:
    case Errc::kUnknownRequest:
      return 404;
    case Errc::kPoolExhausted:
    case Errc::kAlreadyDecided:
    case Errc::kNotSubmitted:
    case Errc::kSessionNotActive:
    case Errc::kAlreadySurveyed:
      return 409;
    case Errc::kTooShort:
    case Errc::kTooFewRequests:
    case Errc::kSurveyOutOfRange:
    case Errc::kInsufficientBase:
      return 422;
    case Errc::kBackendUnavailable:
    case Errc::kMalformedResponse:
    case Errc::kNoCandidates:
      return 502;
    default:
      return 500;
  }
}

struct Service::Impl {
  ServiceConfig config;
  std::unique_ptr<EventLog> log;
  std::unique_ptr<SessionEngine> engine;
  httplib::Server server;

  std::mutex sweep_mu;
  std::condition_variable sweep_cv;
  bool stopping = false;

  Impl(const ServiceConfig& cfg, std::vector<Task> pool, std::vector<Arm> arms, Clock clock)
      : config(cfg) {
    log = config.event_log.empty() ? std::make_unique<EventLog>()
                                   : std::make_unique<EventLog>(config.event_log);
    EngineOptions opts;
    opts.generation = config.generation;
    opts.idle_timeout_ms = config.idle_timeout_ms;
    opts.assignment_seed = config.assignment_seed;
    engine = std::make_unique<SessionEngine>(std::move(pool), std::move(arms), *log, opts,
                                             std::move(clock));
  }

  bool authorized(const HttpRequest& req) const {
    if (config.admin_token.empty()) return false;
    if (auto it = req.headers.find("x-admin-token"); it != req.headers.end()) {
      return it->second == config.admin_token;
    }
    if (auto it = req.headers.find("authorization"); it != req.headers.end()) {
      return it->second == "Bearer " + config.admin_token;
    }
    return false;
  }

  HttpResponse route(const HttpRequest& req);
  HttpResponse admin(const HttpRequest& req, const std::vector<std::string>& parts);
};

HttpResponse Service::Impl::route(const HttpRequest& req) {
  const auto parts = split_path(req.path);
  const bool get = req.method == "GET";
  const bool post = req.method == "POST";

  if (parts.size() == 1 && parts[0] == "health" && get) {
    return json_response(200, {{"status", "ok"}});
  }
  if (!parts.empty() && parts[0] == "admin") return admin(req, parts);
  if (parts.empty() || parts[0] != "sessions") {
    return error_response(404, "NOT_FOUND", "no such endpoint");
  }

  // Idle sessions are closed lazily on writes so reads never touch the log.
  if (post) engine->expire_idle();

  if (parts.size() == 1) {
    if (!post) return error_response(405, "METHOD_NOT_ALLOWED", "use POST");
    const auto s = engine->create_session();
    return json_response(200, {{"session_id", s.session_id},
                               {"task", task_view(s.task)},
                               {"constraints", constraints_view(s.task.constraints)}});
  }
  const std::string& id = parts[1];
  if (parts.size() == 2) {
    if (!get) return error_response(405, "METHOD_NOT_ALLOWED", "use GET");
    return json_response(200, session_view(engine->get(id)));
  }
  if (parts.size() != 3) return error_response(404, "NOT_FOUND", "no such endpoint");
  if (!post) return error_response(405, "METHOD_NOT_ALLOWED", "use POST");
  const std::string& action = parts[2];
  const json body = parse_body(req.body);

  if (action == "suggest") {
    const auto set = engine->record_suggestion_round(id, field<std::string>(body, "raw_draft"));
    return json_response(200, {{"request_id", set.request_id}, {"suggestions", set.suggestions}});
  }
  if (action == "decision") {
    const auto request_id = field<std::string>(body, "request_id");
    const auto kind = field<std::string>(body, "action");
    Decision d;
    if (kind == "accept") {
      const auto index = field<long long>(body, "index");
      if (index < 0) fail(Errc::kBadIndex, "suggestion index must not be negative");
      d = Decision::accept(static_cast<std::size_t>(index));
    } else if (kind == "reject") {
      d = Decision::reject();
    } else {
      fail(Errc::kInvalidArgument, "action must be accept or reject");
    }
    const auto s = engine->record_decision(id, request_id, d);
    return json_response(200, {{"current_draft", s.current_draft}});
  }
  if (action == "draft") {
    const auto s = engine->edit_draft(id, field<std::string>(body, "draft"));
    return json_response(200, {{"current_draft", s.current_draft}});
  }
  if (action == "submit") {
    engine->submit_caption(id, field<std::string>(body, "caption"));
    return json_response(200, {{"status", "submitted"}});
  }
  if (action == "survey") {
    SurveyResponse r{field<int>(body, "helpfulness"), field<int>(body, "grammaticality"),
                     field<int>(body, "satisfaction"), field<int>(body, "self_skill")};
    engine->submit_survey(id, r);
    return json_response(200, {{"status", "recorded"}});
  }
  return error_response(404, "NOT_FOUND", "no such endpoint");
}

HttpResponse Service::Impl::admin(const HttpRequest& req, const std::vector<std::string>& parts) {
  if (!authorized(req)) return error_response(401, "UNAUTHORIZED", "admin token required");
  if (req.method != "GET") return error_response(405, "METHOD_NOT_ALLOWED", "use GET");
  const std::string route = [&] {
    std::string r;
    for (std::size_t i = 1; i < parts.size(); ++i) r += "/" + parts[i];
    return r;
  }();

  if (route == "/snapshot") {
    const auto sessions = engine->sessions();
    std::uint64_t last = 0;
    json all = json::object();
    for (const auto& [id, s] : sessions) {
      last = std::max(last, s.last_event_id);
      all[id] = to_json(s);
    }
    return json_response(200, {{"last_event_id", last}, {"sessions", std::move(all)}});
  }

  // Every other admin read works from one log snapshot taken here.
  const std::string text = log->snapshot();
  if (route == "/export/events") return {200, text, "application/x-ndjson"};
  const auto sessions = replay(std::string_view(text));
  if (route == "/export/feedback") {
    auto pairs = extract_pairs(sessions, config.feedback);
    auto ratio_it = req.query.find("ratio");
    if (ratio_it == req.query.end()) {
      FeedbackDataset ds;
      ds.pairs = std::move(pairs);
      return {200, ds.to_jsonl(), "application/x-ndjson"};
    }
    double ratio = 0;
    std::uint64_t seed = 0;
    try {
      ratio = std::stod(ratio_it->second);
      if (auto s = req.query.find("seed"); s != req.query.end()) seed = std::stoull(s->second);
    } catch (const std::exception&) {
      fail(Errc::kInvalidArgument, "ratio and seed must be numbers");
    }
    std::vector<TrainingPair> base;
    if (!config.base_corpus.empty()) base = read_training_pairs(config.base_corpus);
    const auto ds = mix_with_original(std::move(pairs), base, ratio, seed);
    return {200, ds.to_jsonl(), "application/x-ndjson"};
  }
  if (route == "/report") {
    ReportInputs in;
    in.sessions = sessions;
    const auto rep = build_report(in);
    if (auto f = req.query.find("format"); f != req.query.end() && f->second == "text") {
      return {200, rep.to_text(), "text/plain"};
    }
    return {200, rep.to_json().dump(2) + "\n", "application/json"};
  }
  return error_response(404, "NOT_FOUND", "no such endpoint");
}

Service::Service(const ServiceConfig& config) {
  config.validate();
  if (config.task_pool.empty()) fail(Errc::kInvalidConfig, "task_pool is required");
  impl_ = std::make_unique<Impl>(config, load_task_pool(config.task_pool, config.constraints),
                                 build_arms(config.arms), system_clock_ms);
}

Service::Service(const ServiceConfig& config, std::vector<Task> pool, std::vector<Arm> arms,
                 Clock clock)
    : impl_(std::make_unique<Impl>(config, std::move(pool), std::move(arms), std::move(clock))) {}

Service::~Service() { stop(); }

HttpResponse Service::handle(const HttpRequest& request) {
  try {
    return impl_->route(request);
  } catch (const Error& e) {
    const int status = http_status(e.code());
    // Backend failures can carry arm-identifying detail; keep them generic.
    const std::string message =
        status == 502 ? std::string("suggestion backend failed") : std::string(e.what());
    return error_response(status, e.name(), message, e.actual, e.required);
  } catch (const std::exception& e) {
    return error_response(500, "INTERNAL", "internal error");
  }
}

int Service::bind() {
  auto& svr = impl_->server;
  auto forward = [this](const httplib::Request& in, httplib::Response& out) {
    HttpRequest req;
    req.method = in.method;
    req.path = in.path;
    req.body = in.body;
    for (const auto& [k, v] : in.params) req.query.emplace(k, v);
    for (const auto& [k, v] : in.headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      req.headers.emplace(std::move(key), v);
    }
    const auto res = handle(req);
    out.status = res.status;
    out.set_content(res.body, res.content_type);
  };
  svr.Get(".*", forward);
  svr.Post(".*", forward);
  const auto [host, port] = split_listen(impl_->config.listen);
  if (port == 0) {
    const int bound = svr.bind_to_any_port(host);
    if (bound < 0) fail(Errc::kIoError, "cannot bind " + host);
    return bound;
  }
  if (!svr.bind_to_port(host, port)) {
    fail(Errc::kIoError, "cannot bind " + impl_->config.listen);
  }
  return port;
}

void Service::run(std::int64_t sweep_ms) {
  std::thread sweeper([this, sweep_ms] {
    std::unique_lock lock(impl_->sweep_mu);
    while (!impl_->stopping) {
      impl_->sweep_cv.wait_for(lock, std::chrono::milliseconds(sweep_ms));
      if (impl_->stopping) break;
      try {
        impl_->engine->expire_idle();
      } catch (const std::exception&) {
      }
    }
  });
  impl_->server.listen_after_bind();
  {
    std::lock_guard lock(impl_->sweep_mu);
    impl_->stopping = true;
  }
  impl_->sweep_cv.notify_all();
  sweeper.join();
}

void Service::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->sweep_mu);
    impl_->stopping = true;
  }
  impl_->sweep_cv.notify_all();
  impl_->server.stop();
}

void Service::wait_ready() { impl_->server.wait_until_ready(); }

SessionEngine& Service::engine() { return *impl_->engine; }
const EventLog& Service::log() const { return *impl_->log; }

}  // namespace milrw
