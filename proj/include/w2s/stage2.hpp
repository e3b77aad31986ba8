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

// Stage II: confidence over n sampled responses and contrastive preference
// pairs for DPO/ORPO-style trainers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "w2s/backend.hpp"
#include "w2s/datamodel.hpp"
#include "w2s/rng.hpp"

namespace w2s {

// n zero-shot CoT samples per question (default n=10 at temperature 1.0).
GenBatch sample_for_confidence(ModelBackend& backend, const EndpointSpec& spec,
                               const DatasetManifest& questions, int n, double temperature,
                               const ExtractionProfile& profile);

struct ConfidenceSummary {
  std::string question_id;
  std::vector<GenResponse> samples;
  std::optional<AnswerKey> modal_answer;  // absent on ties or when nothing parses
  int modal_count = 0;
  double confidence = 0.0;  // modal_count / n
  bool confident = false;   // confidence >= tau, unique modal, parseable
};

// Groups parseable answers into answers_equal classes. Unparseable samples
// count toward n but never toward a class.
ConfidenceSummary compute_confidence(const std::string& question_id,
                                     std::vector<GenResponse> samples, double tau);

struct SamplePartition {
  std::vector<GenResponse> plus;   // answers equal to the modal answer
  std::vector<GenResponse> minus;  // everything else, Unparseable included
};

// Requires a confident summary.
SamplePartition partition_samples(const ConfidenceSummary& summary);

enum class PairRecipe { WeakInPair, SelfGenerated };
std::string_view to_string(PairRecipe recipe);
PairRecipe parse_pair_recipe(const std::string& s);

enum class ResponseSource { Weak, Strong };
std::string_view to_string(ResponseSource source);

struct PreferencePair {
  std::string question_id;
  std::string question;
  std::string chosen;
  std::string rejected;
  ResponseSource chosen_source = ResponseSource::Strong;
  ResponseSource rejected_source = ResponseSource::Strong;
  double confidence = 0.0;
  AnswerKey a_plus;

  bool operator==(const PreferencePair&) const = default;
};

enum class SkipReason { Unconfident, EmptyMinus, WeakMissing, SamplingFailed };
std::string_view to_string(SkipReason reason);

struct PairDecision {
  std::optional<PreferencePair> pair;
  std::optional<SkipReason> skip;
};

// Applies the pairing rule to one question. `rng` supplies the uniform draw
// from A+ or A-.
PairDecision build_pair(const ConfidenceSummary& summary, const std::string& question_text,
                        const GenResponse* weak_response, Rng& rng, PairRecipe recipe);

struct PairBuildResult {
  std::vector<PreferencePair> pairs;  // question-id order
  std::map<SkipReason, std::vector<std::string>> skipped;
  std::vector<ConfidenceSummary> summaries;
};

// Builds pairs for every question in manifest order. Each question draws from
// its own stream derive_seed(seed, id), so results do not depend on order.
PairBuildResult build_preference_pairs(const DatasetManifest& questions, const GenBatch& samples,
                                       const GenBatch& weak, int n, double tau, PairRecipe recipe,
                                       std::uint64_t seed);

// JSONL {"id","question","chosen","rejected","chosen_source","rejected_source",
// "confidence","a_plus"}, sorted by id.
std::string serialize_preference_pairs(std::vector<PreferencePair> pairs);
std::vector<PreferencePair> parse_preference_pairs(const std::string& jsonl);
std::string serialize_skip_report(const PairBuildResult& result);

void emit_preference_dataset(const PairBuildResult& result, const std::filesystem::path& jsonl_path,
                             const std::filesystem::path& skip_report_path);
std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path);

// Re-extracts every chosen/rejected text and reports each pair that breaks
// extract(chosen) = a+ and extract(rejected) != a+, falls below tau, or has
// an illegal source combination.
std::vector<std::string> validate_preference_pairs(const std::vector<PreferencePair>& pairs,
                                                   const ExtractionProfile& profile, double tau,
                                                   PairRecipe recipe);

}  // namespace w2s
