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

// Stage I: weak data, weak-ICL data, final-answer-consistency selection,
// augmentation, SFT dataset emission and iterative round planning.
//
// Every entry point that touches questions takes a gold-stripped manifest
// and refuses one that still carries gold answers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "w2s/backend.hpp"
#include "w2s/datamodel.hpp"
#include "w2s/prompts.hpp"

namespace w2s {

enum class PromptStyle { Standard, ZeroShotCot };

std::string_view to_string(PromptStyle style);
PromptStyle parse_prompt_style(const std::string& s);

// Prompt batch for zero-shot generation. ZeroShotCot requests are two-stage.
std::vector<PromptRequest> zero_shot_requests(const DatasetManifest& questions, PromptStyle style);

// D_weak: one greedy response per question unless `cfg` overrides.
GenBatch produce_weak_data(ModelBackend& backend, const EndpointSpec& spec,
                           const DatasetManifest& questions, const ExtractionProfile& profile,
                           PromptStyle style = PromptStyle::Standard,
                           const SamplingConfig& cfg = SamplingConfig::greedy());

// Seeded draw of k demonstrations from the successful weak responses,
// rendered in manifest order. Fixed once per run.
std::vector<Demonstration> select_demonstrations(const GenBatch& weak,
                                                 const DatasetManifest& questions, std::size_t k,
                                                 std::uint64_t seed);

// Demonstration file: JSONL {"question": str, "response": str}.
std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path);
void save_demonstrations(const std::vector<Demonstration>& demos,
                         const std::filesystem::path& path);

// D_icl: one response per question from the k-shot weak-demonstration prompt.
GenBatch produce_icl_data(ModelBackend& backend, const EndpointSpec& spec,
                          const DatasetManifest& questions, const std::vector<Demonstration>& demos,
                          std::size_t k, const ExtractionProfile& profile,
                          const SamplingConfig& cfg = SamplingConfig::greedy());

struct CandidatePair {
  std::string question_id;
  GenResponse weak;
  GenResponse icl;
  bool consistent = false;
};

struct Selection {
  std::vector<CandidatePair> selected;   // consistent, in weak input order
  std::vector<CandidatePair> pool;       // both sides present, answers disagree
  std::vector<CandidatePair> augmented;  // drawn from pool by augment_selection
  std::vector<std::string> excluded;     // ids with a failed side
  std::size_t shortfall = 0;             // augmentation target not reachable

  std::size_t size() const { return selected.size() + augmented.size(); }
};

// Keeps a question iff answers_equal(weak, icl). Throws DataError if the two
// batches do not cover the same question ids.
Selection consistency_select(const GenBatch& weak, const GenBatch& icl);

// Adds seeded draws (whole question pairs) from the inconsistent pool until
// the selection reaches min(target_n, |selected| + |pool|).
Selection augment_selection(const Selection& selection, std::size_t target_n, std::uint64_t seed);

// Selection persisted as JSON: ids per bucket plus the shortfall.
std::string serialize_selection(const Selection& selection);
Selection parse_selection(const std::string& text, const GenBatch& weak, const GenBatch& icl);

enum class SftVariant { FullWeak, WeakFt, IclFt, HybridFt };

std::string_view to_string(SftVariant variant);
SftVariant parse_sft_variant(const std::string& s);

struct SftRecord {
  std::string id;
  std::string question;
  std::string response;
  std::string variant;
  int round = 1;
  std::string origin;

  bool operator==(const SftRecord&) const = default;
};

struct SftDataset {
  SftVariant variant = SftVariant::WeakFt;
  int round = 1;
  std::vector<SftRecord> records;
  std::vector<std::string> provenance;  // distinct origin endpoint ids
};

// full_weak is built from the weak batch; the other variants from the
// selection. Throws DataError when the result would be empty.
SftDataset build_sft_dataset(SftVariant variant, int round, const DatasetManifest& questions,
                             const GenBatch& weak, const Selection& selection);

// JSONL {"id","question","response","variant","round","origin"}.
std::string serialize_sft(const SftDataset& dataset);
void emit_sft_dataset(const SftDataset& dataset, const std::filesystem::path& path);
std::vector<SftRecord> load_sft_records(const std::filesystem::path& path);

// Naming shared between the planner and the orchestrator.
std::string round_key(int round, const std::string& role);    // "r1.weak"
std::string model_role(const std::string& base, int round);   // "weak_ft.r1"

struct GenerationJob {
  std::string source_role;  // endpoint role to query
  std::string output_key;   // dataset key in the run state
  PromptStyle style = PromptStyle::ZeroShotCot;
};

struct RoundPlan {
  bool stop = false;
  int next_round = 0;
  std::vector<GenerationJob> jobs;
  std::vector<std::string> steps;    // "select", "emit weak_ft", ...
  std::string final_hybrid;          // set when stop: dataset for M_plus
};

// Plans round r+1 from a completed round r. `registered_roles` lists the
// endpoint roles currently available. Throws DependencyError naming a
// missing fine-tuned endpoint role.
RoundPlan plan_next_round(const RoundState& state, int rounds_budget,
                          const std::vector<std::string>& registered_roles);

}  // namespace w2s
