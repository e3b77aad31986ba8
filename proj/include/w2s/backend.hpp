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

// Uniform generation over remote OpenAI-compatible endpoints and the
// deterministic simulator.
//
// generate() fans a batch of prompts out over at most `max_in_flight`
// workers, retries transient failures with exponential backoff and
// reassembles results by input index, so the output never depends on
// completion order. Items that exhaust their retries become GenFailure
// records; nothing is dropped silently.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "w2s/answer_norm.hpp"

namespace w2s {

enum class EndpointKind { Remote, Simulated };
enum class WireApi { Completions, Chat };

struct RetryPolicy {
  int attempts = 3;              // retries after the first try
  double backoff_seconds = 0.5;  // doubled after every retry
};

struct EndpointSpec {
  std::string id;
  EndpointKind kind = EndpointKind::Simulated;
  std::string base_url;     // remote
  std::string sim_config;   // simulated: path to a SimModelConfig JSON file
  std::string model_name;
  WireApi api = WireApi::Completions;
  std::string auth_env;     // name of the environment variable holding the key
  double request_timeout = 120.0;
  int max_in_flight = 8;
  RetryPolicy retry;
};

// Returns diagnostics (empty when valid). `path` prefixes field names.
std::vector<std::string> validate_endpoint(const EndpointSpec& spec, const std::string& path);

struct SamplingConfig {
  double temperature = 0.0;
  int n = 1;
  int max_tokens = 512;
  std::vector<std::string> stop;
  std::optional<std::uint64_t> seed;

  static SamplingConfig greedy() { return {}; }
  static SamplingConfig sampled(int n, double temperature) {
    SamplingConfig c;
    c.n = n;
    c.temperature = temperature;
    return c;
  }
};

std::vector<std::string> validate_sampling(const SamplingConfig& cfg, const std::string& path);

// One prompt in a batch. When `answer_cue` is set the request is two-stage:
// the completion is treated as a reasoning path, then prompt + reasoning +
// " " + cue is completed greedily to obtain the answer.
struct PromptRequest {
  std::string question_id;
  std::string prompt;
  std::optional<std::string> answer_cue;
};

struct GenResponse {
  std::string question_id;
  std::string text;
  AnswerKey answer;
  std::string origin;
  int sample_index = 0;

  bool operator==(const GenResponse&) const = default;
};

struct GenFailure {
  std::string question_id;
  std::size_t input_index = 0;
  int samples_lost = 0;
  std::string error;

  bool operator==(const GenFailure&) const = default;
};

struct GenBatch {
  std::vector<GenResponse> responses;  // ordered by (input index, sample index)
  std::vector<GenFailure> failures;    // ordered by input index

  double failure_rate(std::size_t prompts) const;
  bool operator==(const GenBatch&) const = default;
};

// Retryable errors (timeouts, 429, 5xx). Anything else fails the item at once.
class TransientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  // Returns up to cfg.n completion texts for one prompt.
  virtual std::vector<std::string> complete(const PromptRequest& request,
                                            const SamplingConfig& cfg) = 0;
};

// Builds the backend for an endpoint. Relative simulator paths resolve
// against `base_dir`. Throws ConfigurationError when a named credential
// variable is unset.
std::unique_ptr<ModelBackend> make_backend(const EndpointSpec& spec,
                                           const std::filesystem::path& base_dir = {});

GenBatch generate(ModelBackend& backend, const EndpointSpec& spec,
                  const std::vector<PromptRequest>& prompts, const SamplingConfig& cfg,
                  const ExtractionProfile& profile);

// JSONL persistence for generation batches. Each line is either a response
// {"kind":"response","id","sample","text","origin"} or a failure
// {"kind":"failure","id","index","lost","error"}. Answers are re-extracted
// on load under the given profile.
std::string serialize_batch(const GenBatch& batch);
GenBatch parse_batch(const std::string& jsonl, const ExtractionProfile& profile);
void save_batch(const GenBatch& batch, const std::filesystem::path& path);
GenBatch load_batch(const std::filesystem::path& path, const ExtractionProfile& profile);

}  // namespace w2s
