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

// Dataset manifests, gold splits and persisted run state.
//
// Manifests are line-delimited JSON, one question per line:
//   {"id": str, "text": str, "gold_answer": str?, "level": str?, "source": str?}
// Line order is the canonical iteration order for every seeded operation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace w2s {

struct Question {
  std::string id;
  std::string text;
  // Raw gold answer as stored in the manifest; normalized on use.
  std::optional<std::string> gold_answer;
  std::optional<std::string> level;
  std::string source;

  bool operator==(const Question&) const = default;
};

struct DatasetManifest {
  std::string name;
  std::vector<Question> questions;
  std::vector<std::string> declared_levels;
  bool has_gold = false;

  std::size_t size() const { return questions.size(); }
  bool operator==(const DatasetManifest&) const = default;
};

// Reads a JSONL manifest. Level labels are declared by `declared_levels`
// when given; otherwise they are collected from the file (numeric-aware
// ascending order). Errors name the offending line or id.
DatasetManifest load_manifest(const std::filesystem::path& path,
                              const std::optional<std::vector<std::string>>&
                                  declared_levels = std::nullopt);
DatasetManifest parse_manifest(const std::string& jsonl, const std::string& name,
                               const std::optional<std::vector<std::string>>&
                                   declared_levels = std::nullopt);
std::string serialize_manifest(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Copy with every gold answer removed. This is the only form of a manifest
// the curation stages ever receive.
DatasetManifest strip_gold(const DatasetManifest& manifest);

// Checks id uniqueness, uniform gold presence and level membership.
void check_manifest(const DatasetManifest& manifest);

struct GoldSplit {
  std::uint64_t seed = 0;
  DatasetManifest part1;            // weak model's supervised data, with gold
  DatasetManifest part2_questions;  // curation-facing, gold stripped
  DatasetManifest part2_sealed;     // same questions, gold kept for evaluation
};

// Seeded shuffle then an even split; part1 receives the extra element when
// the size is odd.
GoldSplit split_gold(const DatasetManifest& manifest, std::uint64_t seed);

// Tops both parts up to `target_each` with seeded draws (without
// replacement) from `aux`. Each aux item lands in exactly one part.
GoldSplit augment_split(const GoldSplit& split, const DatasetManifest& aux,
                        std::size_t target_each, std::uint64_t seed);

// Persisted state of a run. Paths are stored relative to the directory that
// holds the state file.
struct RoundState {
  int round = 1;
  std::map<std::string, std::string> dataset_paths;   // role -> path
  std::map<std::string, std::string> endpoint_ids;    // model role -> endpoint id
  std::map<std::string, std::string> content_digests; // path -> sha256
  std::map<std::string, std::string> stage_stamps;    // stage -> input fingerprint

  bool operator==(const RoundState&) const = default;
};

// Registers `path` under `role` and records its current digest.
void record_artifact(RoundState& state, const std::filesystem::path& base_dir,
                     const std::string& role, const std::string& relative_path);

void save_round_state(const RoundState& state, const std::filesystem::path& path);

// Loads the state and verifies every recorded digest against the files on
// disk. Throws DependencyError naming the first missing or modified path.
RoundState resume_round_state(const std::filesystem::path& path);

// Loads without verification; used to decide what must be regenerated.
RoundState load_round_state(const std::filesystem::path& path);

// Paths whose file is missing or whose digest changed.
std::vector<std::string> stale_artifacts(const RoundState& state,
                                         const std::filesystem::path& base_dir);

}  // namespace w2s
