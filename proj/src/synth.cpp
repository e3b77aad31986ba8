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

#include "w2s/synth.hpp"

#include <fmt/format.h>

#include "json.hpp"
#include "w2s/datamodel.hpp"
#include "w2s/digest.hpp"
#include "w2s/rng.hpp"
#include "w2s/simulator.hpp"

namespace w2s {

namespace {

using nlohmann::json;

DatasetManifest make_manifest(const std::string& name, const std::string& prefix, std::size_t n,
                              bool levels) {
  DatasetManifest m;
  m.name = name;
  m.has_gold = true;
  for (std::size_t i = 0; i < n; ++i) {
    Question q;
    q.id = fmt::format("{}-{:04d}", prefix, i);
    q.text = fmt::format("Synthetic problem {} of set {}: compute the hidden value.", i, name);
    q.gold_answer = synthetic_truth(q.id);
    if (levels) q.level = std::to_string(1 + i % 5);
    q.source = "synthetic";
    m.questions.push_back(std::move(q));
  }
  if (levels) m.declared_levels = {"1", "2", "3", "4", "5"};
  return m;
}

std::string file_name(const std::string& role) {
  std::string s = role;
  for (char& c : s)
    if (c == '.') c = '_';
  return s + ".json";
}

}  // namespace

std::filesystem::path write_synthetic_bundle(const std::filesystem::path& dir,
                                             const SynthOptions& options) {
  save_manifest(make_manifest("train", "tr", options.train, false), dir / "data/train.jsonl");
  save_manifest(make_manifest("aux", "ax", options.aux, false), dir / "data/aux.jsonl");
  save_manifest(make_manifest("test", "te", options.test, true), dir / "data/test.jsonl");

  json endpoints = json::array();
  for (const auto& [role, p] : options.accuracy) {
    json sim{{"seed", derive_seed(options.seed, "sim:" + role)},
             {"default_correct_prob", p},
             {"wrong_alternatives", 9}};
    write_file_atomic(dir / "sim" / file_name(role), sim.dump(2) + "\n");
    endpoints.push_back({{"id", "sim-" + role},
                         {"kind", "simulated"},
                         {"sim_config", "sim/" + file_name(role)},
                         {"role", role}});
  }
  if (options.judge) {
    json sim{{"seed", derive_seed(options.seed, "sim:judge")},
             {"default_correct_prob", 0.5},
             {"judge_mode", true}};
    write_file_atomic(dir / "sim/judge.json", sim.dump(2) + "\n");
    endpoints.push_back(
        {{"id", "sim-judge"}, {"kind", "simulated"}, {"sim_config", "sim/judge.json"}, {"role", "judge"}});
  }

  json profile{{"cues", {"The answer is"}}, {"strip_units", json::array()}, {"percent_as_fraction", true}};
  write_file_atomic(dir / "profile.json", profile.dump(2) + "\n");

  json eval_roles = json::array();
  for (const char* r : {"weak", "strong_base", "m_plus", "m_pro", "strong_gold"})
    if (options.accuracy.count(r)) eval_roles.push_back(r);

  json config{
      {"version", 1},
      {"seed", options.seed},
      {"output_dir", "out"},
      {"profile", "profile.json"},
      {"data", {{"train", "data/train.jsonl"}, {"aux", "data/aux.jsonl"}, {"test", "data/test.jsonl"}}},
      {"split", {{"seed", options.seed}}},
      {"endpoints", endpoints},
      {"stage1", {{"demo_count", 4}, {"rounds", options.rounds}}},
      {"stage2", {{"n", 10}, {"tau", 0.6}, {"temperature", 1.0}, {"recipe", "weak_in_pair"}}},
      {"eval",
       {{"roles", eval_roles},
        {"k", 10},
        {"baselines", {{"strong_base", "strong_base"}}},
        {"diversity", true},
        {"diversity_max_questions", 50}}},
  };
  if (options.accuracy.count("weak") && options.accuracy.count("m_plus") &&
      options.accuracy.count("strong_gold"))
    config["eval"]["pgr"] = {{"floor", "weak"}, {"weak_to_strong", "m_plus"}, {"ceiling", "strong_gold"}};
  if (options.judge) config["eval"]["judge_role"] = "judge";

  const auto path = dir / "config.json";
  write_file_atomic(path, config.dump(2) + "\n");
  return path;
}

}  // namespace w2s
