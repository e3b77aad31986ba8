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

#include "w2s/simulator.hpp"

#include <cmath>

#include <fmt/format.h>

#include "json.hpp"
#include "w2s/datamodel.hpp"
#include "w2s/digest.hpp"
#include "w2s/error.hpp"
#include "w2s/rng.hpp"

namespace w2s {
namespace {

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

std::string synthetic_truth(const std::string& question_id) {
  return std::to_string(10 + fnv1a(question_id) % 990);
}

std::string wrong_alternative(const std::string& truth, int j) {
  AnswerKey key = normalize_answer(truth);
  if (key.is_numeric()) return render_rational(*key.numeric + j * 7);
  return fmt::format("{} (variant {})", truth, j);
}

void SimModelConfig::validate() const {
  if (default_correct_prob < 0.0 || default_correct_prob > 1.0)
    throw DataError("sim config: default_correct_prob must lie in [0, 1]");
  if (wrong_alternatives < 1) throw DataError("sim config: wrong_alternatives must be >= 1");
  if (transient_failures < 0) throw DataError("sim config: transient_failures must be >= 0");
  for (const auto& [id, outcomes] : distributions) {
    if (outcomes.empty()) throw DataError(fmt::format("sim config: empty distribution for '{}'", id));
    double total = 0.0;
    for (const auto& o : outcomes) {
      if (o.prob < 0.0 || o.prob > 1.0)
        throw DataError(fmt::format("sim config: probability out of range for '{}'", id));
      total += o.prob;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw DataError(fmt::format("sim config: distribution for '{}' sums to {} (expected 1)", id,
                                  total));
  }
  if (!judge_mode && reasoning_template.find("{answer}") == std::string::npos)
    throw DataError("sim config: template must contain {answer}");
}

SimModelConfig SimModelConfig::from_json_text(const std::string& text,
                                              const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("sim config: malformed JSON ({})", e.what()));
  }
  SimModelConfig c;
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    c.default_correct_prob = j.value("default_correct_prob", 0.5);
    c.wrong_alternatives = j.value("wrong_alternatives", 9);
    c.reasoning_template = j.value("template", c.reasoning_template);
    c.transient_failures = j.value("transient_failures", 0);
    c.judge_mode = j.value("judge_mode", false);
    if (j.contains("fail_ids")) {
      for (const auto& id : j["fail_ids"]) c.fail_ids.insert(id.get<std::string>());
    }
    if (j.contains("distributions")) {
      for (const auto& [id, arr] : j["distributions"].items()) {
        auto& outcomes = c.distributions[id];
        for (const auto& e : arr) {
          SimOutcome o;
          o.answer = e.at("answer").is_string() ? e.at("answer").get<std::string>()
                                                : e.at("answer").dump();
          o.prob = e.at("prob").get<double>();
          if (e.contains("reasoning")) o.reasoning = e["reasoning"].get<std::string>();
          outcomes.push_back(std::move(o));
        }
      }
    }
    if (j.contains("truth")) {
      for (const auto& [id, ans] : j["truth"].items())
        c.truth[id] = ans.is_string() ? ans.get<std::string>() : ans.dump();
    }
    if (j.contains("truth_manifest")) {
      std::filesystem::path p = j["truth_manifest"].get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      auto m = load_manifest(p);
      for (const auto& q : m.questions)
        if (q.gold_answer) c.truth[q.id] = *q.gold_answer;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("sim config: {}", e.what()));
  }
  c.validate();
  return c;
}

SimModelConfig SimModelConfig::load(const std::filesystem::path& path) {
  return from_json_text(read_file(path), path.parent_path());
}

SimulatedBackend::SimulatedBackend(std::string endpoint_id, SimModelConfig config)
    : endpoint_id_(std::move(endpoint_id)), config_(std::move(config)) {
  config_.validate();
}

SimOutcome SimulatedBackend::draw(const std::string& question_id, int sample_index) const {
  Rng rng(derive_seed(config_.seed, question_id, static_cast<std::uint64_t>(sample_index)));
  const double u = uniform_unit(rng);
  if (auto it = config_.distributions.find(question_id); it != config_.distributions.end()) {
    double acc = 0.0;
    for (const auto& o : it->second) {
      acc += o.prob;
      if (u < acc) return o;
    }
    return it->second.back();
  }
  auto t = config_.truth.find(question_id);
  const std::string truth = t != config_.truth.end() ? t->second : synthetic_truth(question_id);
  if (u < config_.default_correct_prob) return {truth, config_.default_correct_prob, std::nullopt};
  const int j = 1 + static_cast<int>(uniform_index(rng, config_.wrong_alternatives));
  return {wrong_alternative(truth, j), (1.0 - config_.default_correct_prob) / config_.wrong_alternatives,
          std::nullopt};
}

std::string SimulatedBackend::render(const std::string& question_id, const SimOutcome& outcome,
                                     int sample_index) const {
  if (config_.judge_mode) {
    // Correct verdicts come from the configured correctness rate; wrong
    // verdicts name a first error step in 1..3.
    Rng rng(derive_seed(config_.seed, "judge:" + question_id, static_cast<std::uint64_t>(sample_index)));
    const bool correct = uniform_unit(rng) < config_.default_correct_prob;
    const int step = 1 + static_cast<int>(uniform_index(rng, 3));
    return fmt::format(
        "Step-by-step Evaluation: Each step of the student solution was checked in order.\n"
        "Final Judgement: **{}**\nFirst Error Step: {}",
        correct ? "correct" : "wrong", correct ? std::string("N/A") : std::to_string(step));
  }
  std::string text = outcome.reasoning ? *outcome.reasoning + " The answer is {answer}."
                                       : config_.reasoning_template;
  replace_all(text, "{question_id}", question_id);
  replace_all(text, "{answer}", outcome.answer);
  replace_all(text, "{sample}", std::to_string(sample_index));
  return text;
}

std::vector<std::string> SimulatedBackend::complete(const PromptRequest& request,
                                                    const SamplingConfig& cfg) {
  if (config_.fail_ids.count(request.question_id))
    throw TransientError(fmt::format("simulated outage for '{}'", request.question_id));
  if (config_.transient_failures > 0) {
    std::lock_guard lock(attempts_mu_);
    int& seen = attempts_[request.question_id];
    if (seen < config_.transient_failures) {
      ++seen;
      throw TransientError(fmt::format("simulated transient failure {} for '{}'", seen,
                                       request.question_id));
    }
    seen = 0;
  }
  const int n = cfg.temperature == 0.0 ? 1 : cfg.n;
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(render(request.question_id, draw(request.question_id, i), i));
  return out;
}

}  // namespace w2s
