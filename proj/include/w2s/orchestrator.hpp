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

// Config-driven pipeline: split -> stage1 rounds -> stage2 -> eval.
//
// Every unit of work is fingerprinted (config subset, endpoint specs,
// simulator files and input digests). A unit whose fingerprint matches the
// run state and whose outputs are intact is skipped, so rerunning a finished
// stage is a no-op. Each written file is recorded in <output_dir>/state.json
// with its digest.

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "w2s/config.hpp"
#include "w2s/datamodel.hpp"

namespace w2s {

enum class ExitCode : int {
  Ok = 0,
  Failure = 1,
  Validation = 2,
  Dependency = 3,
  EndpointExhausted = 4,
};

// Exclusive ownership of an output directory via <dir>/.lock.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct RunSummary {
  std::vector<std::string> executed;    // units that ran
  std::vector<std::string> up_to_date;  // units skipped
  std::vector<std::string> messages;    // training hand-off instructions etc.
  bool stage1_complete = false;
};

class Pipeline {
 public:
  // Validates the configuration (ValidationError on failure) and takes the
  // output directory lock. With `resume` the existing state must verify
  // against disk (DependencyError otherwise).
  Pipeline(RunConfig config, bool resume, std::ostream& log);

  void split();

  // Whole Stage I: every round whose endpoints are registered.
  void stage1();
  void stage1_gen_weak(int round);
  void stage1_gen_icl(int round);
  void stage1_select(int round);
  void stage1_emit(int round);
  RoundPlan stage1_plan(int round);

  void stage2();
  void stage2_sample();
  void stage2_build();
  void stage2_emit();

  void eval();
  std::string report() const;

  // First round whose emission is missing (rounds + 1 when all are done).
  int next_round() const;

  const RoundState& state() const { return state_; }
  const RunSummary& summary() const { return summary_; }
  std::filesystem::path out_dir() const { return out_; }

 private:
  using Outputs = std::map<std::string, std::string>;  // key -> relative path

  bool up_to_date(const std::string& unit, const std::string& stamp, const Outputs& outputs);
  void finish(const std::string& unit, const std::string& stamp, const Outputs& outputs);
  std::string stamp(const std::string& unit, const nlohmann::json& settings,
                    const std::vector<std::string>& input_keys,
                    const std::vector<std::string>& roles) const;
  std::filesystem::path require(const std::string& key) const;
  const RegisteredEndpoint& endpoint(const std::string& role) const;
  void check_failures(const std::string& unit, const GenBatch& batch, std::size_t prompts);
  DatasetManifest curation_questions() const;
  const ExtractionProfile& profile() const { return profile_; }
  void save_state();
  void note(const std::string& message);

  RunConfig config_;
  std::filesystem::path out_;
  std::optional<RunLock> lock_;
  std::ostream& log_;
  ExtractionProfile profile_;
  RoundState state_;
  RunSummary summary_;
};

// CLI entry: parses argv, runs the selected stage and maps errors to exit
// codes. Output goes to `out`, diagnostics to `err`.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace w2s
