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

// Client for OpenAI-compatible inference servers.
//
// POST {base_url}/v1/completions       {model, prompt, temperature, n, max_tokens, stop[, seed]}
// POST {base_url}/v1/chat/completions  {model, messages, temperature, n, max_tokens, stop[, seed]}
//
// Completion text is taken from choices[i].text (or choices[i].message.content)
// verbatim, ordered by choices[i].index.

#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "w2s/backend.hpp"

namespace w2s {

class RemoteBackend : public ModelBackend {
 public:
  // Throws ConfigurationError when spec.auth_env names an unset variable.
  explicit RemoteBackend(EndpointSpec spec);

  std::vector<std::string> complete(const PromptRequest& request,
                                    const SamplingConfig& cfg) override;

  // Request body for one call; exposed for wire-format tests.
  nlohmann::json request_body(const std::string& prompt, const SamplingConfig& cfg) const;

 private:
  std::vector<std::string> call(const std::string& prompt, const SamplingConfig& cfg);

  EndpointSpec spec_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::optional<std::string> api_key_;
};

// Parses a completions/chat response payload into choice texts.
std::vector<std::string> parse_completion_choices(const nlohmann::json& payload, WireApi api);

}  // namespace w2s
