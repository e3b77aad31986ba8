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

// Deterministic simulated answerer.
//
// Every draw is a pure function of (seed, question id, sample index), so a
// simulated endpoint reproduces the same transcript under any schedule.
// Config file:
//   {
//     "seed": 7,
//     "default_correct_prob": 0.4,     // unmapped questions
//     "wrong_alternatives": 9,         // uniform wrong answers
//     "truth_manifest": "gold.jsonl",  // optional: answers treated as correct
//     "template": "... {answer} ...",  // reasoning text, must embed the cue
//     "distributions": {"q1": [{"answer": "25", "prob": 1.0, "reasoning": "..."}]},
//     "fail_ids": ["q9"],              // always fail
//     "transient_failures": 0,         // failed attempts before each success
//     "judge_mode": false              // emit process-judge verdicts instead
//   }

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "w2s/backend.hpp"

namespace w2s {

struct SimOutcome {
  std::string answer;
  double prob = 0.0;
  std::optional<std::string> reasoning;
};

struct SimModelConfig {
  std::uint64_t seed = 0;
  double default_correct_prob = 0.5;
  int wrong_alternatives = 9;
  std::map<std::string, std::vector<SimOutcome>> distributions;
  std::map<std::string, std::string> truth;  // question id -> correct answer
  std::string reasoning_template =
      "We need to solve problem {question_id}. Working through the quantities step by step "
      "leads to {answer}. The answer is {answer}.";
  std::set<std::string> fail_ids;
  int transient_failures = 0;
  bool judge_mode = false;

  // Throws DataError on distributions not summing to 1 within 1e-9,
  // probabilities outside [0,1] or W < 1.
  void validate() const;

  static SimModelConfig load(const std::filesystem::path& path);
  static SimModelConfig from_json_text(const std::string& text,
                                       const std::filesystem::path& base_dir = {});
};

// Correct answer the simulator assumes for questions without a truth entry.
// Synthetic manifests use the same function for their gold answers.
std::string synthetic_truth(const std::string& question_id);

// The j-th (1-based) wrong alternative to `truth`.
std::string wrong_alternative(const std::string& truth, int j);

class SimulatedBackend : public ModelBackend {
 public:
  SimulatedBackend(std::string endpoint_id, SimModelConfig config);

  std::vector<std::string> complete(const PromptRequest& request,
                                    const SamplingConfig& cfg) override;

  // Answer surface and reasoning for one draw; exposed for tests.
  SimOutcome draw(const std::string& question_id, int sample_index) const;

  const SimModelConfig& config() const { return config_; }

 private:
  std::string render(const std::string& question_id, const SimOutcome& outcome,
                     int sample_index) const;

  std::string endpoint_id_;
  SimModelConfig config_;
  std::mutex attempts_mu_;
  std::map<std::string, int> attempts_;
};

}  // namespace w2s
