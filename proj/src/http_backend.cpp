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

#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "milrw/error.hpp"
#include "milrw/generation.hpp"

namespace milrw {

using nlohmann::json;

HttpBackend::HttpBackend(std::string url, std::chrono::milliseconds timeout,
                         std::string identity)
    : timeout_(timeout), identity_(std::move(identity)) {
  constexpr std::string_view kScheme = "http://";
  if (!std::string_view(url).starts_with(kScheme)) {
    fail(Errc::kInvalidConfig, "backend url must start with http://: " + url);
  }
  const auto slash = url.find('/', kScheme.size());
  scheme_host_port_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
  if (scheme_host_port_.size() == kScheme.size()) {
    fail(Errc::kInvalidConfig, "backend url has no host: " + url);
  }
  if (timeout_.count() <= 0) fail(Errc::kInvalidConfig, "backend timeout must be positive");
  if (identity_.empty()) identity_ = "http:" + url;
}

std::vector<Candidate> parse_backend_response(std::string_view body,
                                              std::size_t max_candidates) {
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    fail(Errc::kMalformedResponse, "backend response is not a JSON object");
  }
  auto it = doc.find("candidates");
  if (it == doc.end() || !it->is_array()) {
    fail(Errc::kMalformedResponse, "backend response has no \"candidates\" array");
  }
  std::vector<Candidate> out;
  std::size_t index = 0;
  for (const auto& item : *it) {
    const std::string where = "candidate " + std::to_string(index++);
    if (!item.is_object()) fail(Errc::kMalformedResponse, where + " is not an object");
    auto text = item.find("text");
    auto score = item.find("score");
    if (text == item.end() || !text->is_string() || text->get<std::string>().empty()) {
      fail(Errc::kMalformedResponse, where + " has no non-empty \"text\"");
    }
    if (score == item.end() || !score->is_number() ||
        !std::isfinite(score->get<double>())) {
      fail(Errc::kMalformedResponse, where + " has no finite \"score\"");
    }
    if (out.size() < max_candidates) {
      out.push_back({text->get<std::string>(), score->get<double>()});
    }
  }
  return out;
}

std::vector<Candidate> HttpBackend::candidates(const ModelInput& input,
                                               std::size_t max_candidates) {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const json request = {{"input", input.text}, {"max_candidates", max_candidates}};
  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) {
    fail(Errc::kBackendUnavailable,
         "generation backend unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    fail(Errc::kBackendUnavailable,
         "generation backend returned HTTP " + std::to_string(res->status));
  }
  return parse_backend_response(res->body, max_candidates);
}

}  // namespace milrw
