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

#include "w2s/backend.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"
#include "w2s/digest.hpp"
#include "w2s/error.hpp"
#include "w2s/remote.hpp"
#include "w2s/simulator.hpp"

namespace w2s {

std::vector<std::string> validate_endpoint(const EndpointSpec& s, const std::string& path) {
  std::vector<std::string> d;
  if (s.id.empty()) d.push_back(path + ".id: must not be empty");
  if (s.max_in_flight < 1) d.push_back(path + ".max_in_flight: must be >= 1");
  if (s.retry.attempts < 0) d.push_back(path + ".retry.attempts: must be >= 0");
  if (s.retry.backoff_seconds < 0) d.push_back(path + ".retry.backoff: must be >= 0");
  if (!(s.request_timeout > 0)) d.push_back(path + ".request_timeout: must be > 0");
  if (s.kind == EndpointKind::Remote && s.base_url.empty())
    d.push_back(path + ".base_url: required for remote endpoints");
  if (s.kind == EndpointKind::Remote && s.model_name.empty())
    d.push_back(path + ".model: required for remote endpoints");
  if (s.kind == EndpointKind::Simulated && s.sim_config.empty())
    d.push_back(path + ".sim_config: required for simulated endpoints");
  return d;
}

std::vector<std::string> validate_sampling(const SamplingConfig& c, const std::string& path) {
  std::vector<std::string> d;
  if (c.temperature < 0) d.push_back(path + ".temperature: must be >= 0");
  if (c.n < 1) d.push_back(path + ".n: must be >= 1");
  if (c.temperature == 0.0 && c.n != 1)
    d.push_back(path + ".n: greedy decoding (temperature 0) requires n = 1");
  if (c.max_tokens < 1) d.push_back(path + ".max_tokens: must be >= 1");
  return d;
}

double GenBatch::failure_rate(std::size_t prompts) const {
  if (prompts == 0) return 0.0;
  std::size_t failed_items = 0;
  std::string last;
  for (const auto& f : failures) {
    if (f.question_id != last) ++failed_items;
    last = f.question_id;
  }
  return static_cast<double>(failed_items) / static_cast<double>(prompts);
}

std::unique_ptr<ModelBackend> make_backend(const EndpointSpec& spec,
                                           const std::filesystem::path& base_dir) {
  if (spec.kind == EndpointKind::Remote) return std::make_unique<RemoteBackend>(spec);
  std::filesystem::path p = spec.sim_config;
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return std::make_unique<SimulatedBackend>(spec.id, SimModelConfig::load(p));
}

GenBatch generate(ModelBackend& backend, const EndpointSpec& spec,
                  const std::vector<PromptRequest>& prompts, const SamplingConfig& cfg,
                  const ExtractionProfile& profile) {
  if (auto diags = validate_sampling(cfg, "sampling"); !diags.empty())
    throw ConfigurationError(diags.front());

  struct Slot {
    std::vector<std::string> texts;
    std::string error;
  };
  std::vector<Slot> slots(prompts.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      Slot& slot = slots[i];
      for (int attempt = 0;; ++attempt) {
        try {
          slot.texts = backend.complete(prompts[i], cfg);
          slot.error.clear();
          break;
        } catch (const TransientError& e) {
          slot.error = e.what();
          if (attempt >= spec.retry.attempts) break;
          const double wait = spec.retry.backoff_seconds * std::pow(2.0, attempt);
          if (wait > 0) std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        } catch (const ConfigurationError&) {
          throw;
        } catch (const std::exception& e) {
          slot.error = e.what();
          break;
        }
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, spec.max_in_flight)), prompts.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::exception_ptr> errors(n_workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < n_workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            worker();
          } catch (...) {
            errors[w] = std::current_exception();
            next = prompts.size();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  const int expected = cfg.temperature == 0.0 ? 1 : cfg.n;
  GenBatch batch;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const Slot& slot = slots[i];
    const int got = std::min<int>(static_cast<int>(slot.texts.size()), expected);
    for (int s = 0; s < got; ++s) {
      GenResponse r;
      r.question_id = prompts[i].question_id;
      r.text = slot.texts[static_cast<std::size_t>(s)];
      r.answer = extract_final_answer(r.text, profile);
      r.origin = spec.id;
      r.sample_index = s;
      batch.responses.push_back(std::move(r));
    }
    if (got < expected) {
      batch.failures.push_back({prompts[i].question_id, i, expected - got,
                                slot.error.empty()
                                    ? fmt::format("endpoint returned {} of {} samples", got, expected)
                                    : slot.error});
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// JSONL persistence

std::string serialize_batch(const GenBatch& batch) {
  std::string out;
  for (const auto& r : batch.responses) {
    nlohmann::json j;
    j["kind"] = "response";
    j["id"] = r.question_id;
    j["sample"] = r.sample_index;
    j["origin"] = r.origin;
    j["text"] = r.text;
    out += j.dump() + "\n";
  }
  for (const auto& f : batch.failures) {
    nlohmann::json j;
    j["kind"] = "failure";
    j["id"] = f.question_id;
    j["index"] = f.input_index;
    j["lost"] = f.samples_lost;
    j["error"] = f.error;
    out += j.dump() + "\n";
  }
  return out;
}

GenBatch parse_batch(const std::string& jsonl, const ExtractionProfile& profile) {
  GenBatch batch;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "response") {
        GenResponse r;
        r.question_id = j.at("id").get<std::string>();
        r.sample_index = j.at("sample").get<int>();
        r.origin = j.at("origin").get<std::string>();
        r.text = j.at("text").get<std::string>();
        r.answer = extract_final_answer(r.text, profile);
        batch.responses.push_back(std::move(r));
      } else if (kind == "failure") {
        batch.failures.push_back({j.at("id").get<std::string>(), j.at("index").get<std::size_t>(),
                                  j.at("lost").get<int>(), j.at("error").get<std::string>()});
      } else {
        throw DataError(fmt::format("unknown record kind '{}'", kind));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("generation batch line {}: {}", lineno, e.what()));
    }
  }
  return batch;
}

void save_batch(const GenBatch& batch, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_batch(batch));
}

GenBatch load_batch(const std::filesystem::path& path, const ExtractionProfile& profile) {
  return parse_batch(read_file(path), profile);
}

}  // namespace w2s
