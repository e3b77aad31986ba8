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

// Run configuration: one versioned JSON document that fully determines a
// run. Relative paths resolve against the directory holding the config.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "w2s/backend.hpp"
#include "w2s/stage1.hpp"
#include "w2s/stage2.hpp"

namespace w2s {

inline constexpr int kConfigVersion = 1;

struct RegisteredEndpoint {
  EndpointSpec spec;
  std::vector<std::string> roles;
};

// A baseline or PGR term: either a fixed percent or the greedy accuracy of
// an endpoint role evaluated in the same run.
using ScoreRef = std::variant<double, std::string>;

struct RunConfig {
  int version = kConfigVersion;
  std::filesystem::path base_dir;  // directory of the config file
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  struct Data {
    std::string train;
    std::string aux;
    std::string test;
  } data;

  struct Split {
    std::uint64_t seed = 0;
    std::size_t target_each = 0;  // 0: no augmentation
  } split;

  std::string profile;  // extraction profile path; empty = defaults

  std::vector<RegisteredEndpoint> endpoints;
  double max_failure_rate = 0.5;

  struct Stage1 {
    std::size_t demo_count = 4;
    std::uint64_t demo_seed = 0;
    std::string demo_file;  // optional curated demonstrations
    int rounds = 1;
    std::size_t augment_target = 0;  // 0: no augmentation
    std::uint64_t augment_seed = 0;
    PromptStyle weak_prompt = PromptStyle::Standard;
    int max_tokens = 512;
  } stage1;

  struct Stage2 {
    int n = 10;
    double tau = 0.6;
    double temperature = 1.0;
    PairRecipe recipe = PairRecipe::WeakInPair;
    std::uint64_t seed = 0;
  } stage2;

  struct Eval {
    std::vector<std::string> roles;
    PromptStyle prompt = PromptStyle::ZeroShotCot;
    int k = 10;
    bool pass_at_k = true;
    double pass_temperature = 1.0;
    std::map<std::string, ScoreRef> baselines;
    bool diversity = false;
    int diversity_n = 10;
    std::size_t diversity_max_questions = 0;  // 0: all curation questions
    double diversity_threshold = 0.7;
    std::optional<ScoreRef> pgr_floor, pgr_w2s, pgr_ceiling;
    std::string judge_role;
    std::size_t judge_max_items = 1000;
  } eval;

  nlohmann::json raw;  // document after overrides, for fingerprints

  std::filesystem::path resolve(const std::string& p) const;
  std::filesystem::path out_path() const { return resolve(output_dir); }

  // Endpoint claiming `role`, or nullptr.
  const RegisteredEndpoint* endpoint_for(const std::string& role) const;
  std::vector<std::string> registered_roles() const;
};

// Sets a dotted key ("stage2.tau") to a value parsed as JSON, falling back to
// a plain string. Throws ValidationError for a malformed KEY=VALUE.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Parses the document. Structural problems (wrong types, unknown enum
// values) are reported together as a ValidationError.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

// Every violated invariant, each prefixed with its field path. Empty iff the
// configuration is valid.
std::vector<std::string> validate(const RunConfig& config);

}  // namespace w2s
