// Copyright 2026 The w2s-curate Authors.
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

#include "w2s/remote.hpp"

#include <algorithm>
#include <cstdlib>

#include <fmt/format.h>

#include "httplib.h"
#include "w2s/error.hpp"

namespace w2s {

RemoteBackend::RemoteBackend(EndpointSpec spec) : spec_(std::move(spec)) {
  if (!spec_.auth_env.empty()) {
    const char* key = std::getenv(spec_.auth_env.c_str());
    if (key == nullptr || *key == '\0')
      throw ConfigurationError(fmt::format("endpoint '{}': credential variable {} is not set",
                                           spec_.id, spec_.auth_env));
    api_key_ = key;
  }
  // Split "http://host:port/prefix" into the client origin and a path prefix.
  const std::string& url = spec_.base_url;
  std::size_t scheme_end = url.find("://");
  std::size_t path_start =
      url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  if (path_start != std::string::npos) path_prefix_ = url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

nlohmann::json RemoteBackend::request_body(const std::string& prompt,
                                           const SamplingConfig& cfg) const {
  nlohmann::json body;
  body["model"] = spec_.model_name;
  if (spec_.api == WireApi::Chat) {
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  } else {
    body["prompt"] = prompt;
  }
  body["temperature"] = cfg.temperature;
  body["n"] = cfg.n;
  body["max_tokens"] = cfg.max_tokens;
  if (!cfg.stop.empty()) body["stop"] = cfg.stop;
  if (cfg.seed) body["seed"] = *cfg.seed;
  return body;
}

std::vector<std::string> parse_completion_choices(const nlohmann::json& payload, WireApi api) {
  if (!payload.is_object() || !payload.contains("choices") || !payload["choices"].is_array())
    throw std::runtime_error("response has no 'choices' array");
  std::vector<std::pair<long long, std::string>> indexed;
  long long fallback = 0;
  for (const auto& c : payload["choices"]) {
    long long index = c.contains("index") && c["index"].is_number_integer()
                          ? c["index"].get<long long>()
                          : fallback;
    ++fallback;
    std::string text;
    if (api == WireApi::Chat) {
      if (!c.contains("message") || !c["message"].contains("content") ||
          !c["message"]["content"].is_string())
        throw std::runtime_error("chat choice without message.content");
      text = c["message"]["content"].get<std::string>();
    } else {
      if (!c.contains("text") || !c["text"].is_string())
        throw std::runtime_error("completion choice without text");
      text = c["text"].get<std::string>();
    }
    indexed.emplace_back(index, std::move(text));
  }
  std::stable_sort(indexed.begin(), indexed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  out.reserve(indexed.size());
  for (auto& [i, t] : indexed) out.push_back(std::move(t));
  return out;
}

std::vector<std::string> RemoteBackend::call(const std::string& prompt, const SamplingConfig& cfg) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(spec_.request_timeout);
  const auto usecs = static_cast<time_t>((spec_.request_timeout - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

  const std::string path =
      path_prefix_ + (spec_.api == WireApi::Chat ? "/v1/chat/completions" : "/v1/completions");
  auto res = client.Post(path, headers, request_body(prompt, cfg).dump(), "application/json");
  if (!res) {
    throw TransientError(fmt::format("{}{}: {}", scheme_host_port_, path,
                                     httplib::to_string(res.error())));
  }
  if (res->status == 429 || res->status >= 500)
    throw TransientError(fmt::format("{}{}: HTTP {}", scheme_host_port_, path, res->status));
  if (res->status != 200)
    throw std::runtime_error(fmt::format("{}{}: HTTP {}: {}", scheme_host_port_, path, res->status,
                                         res->body.substr(0, 200)));
  nlohmann::json payload;
  try {
    payload = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransientError(fmt::format("{}{}: malformed JSON body", scheme_host_port_, path));
  }
  return parse_completion_choices(payload, spec_.api);
}

std::vector<std::string> RemoteBackend::complete(const PromptRequest& request,
                                                 const SamplingConfig& cfg) {
  std::vector<std::string> first = call(request.prompt, cfg);
  if (!request.answer_cue) return first;

  SamplingConfig answer_cfg;
  answer_cfg.temperature = 0.0;
  answer_cfg.n = 1;
  answer_cfg.max_tokens = 32;
  answer_cfg.stop = {"\n"};
  answer_cfg.seed = cfg.seed;
  std::vector<std::string> out;
  out.reserve(first.size());
  for (const auto& reasoning : first) {
    const std::string cued = reasoning + " " + *request.answer_cue;
    auto answer = call(request.prompt + cued, answer_cfg);
    out.push_back(cued + (answer.empty() ? std::string() : answer.front()));
  }
  return out;
}

}  // namespace w2s
