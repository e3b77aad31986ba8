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

// Evaluation: accuracy, pass@k, PGR, per-level breakdown, ROUGE-L diversity
// clustering and the process-level judge prompt.
//
// This is the only module that reads gold answers.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "w2s/backend.hpp"
#include "w2s/datamodel.hpp"

namespace w2s {

// Per-question correctness of a greedy run against a gold manifest, in
// manifest order. Questions without a response count as incorrect.
struct GradedResult {
  std::string question_id;
  bool answered = false;
  bool correct = false;
};

std::vector<GradedResult> grade_responses(const GenBatch& batch, const DatasetManifest& gold,
                                          const ExtractionProfile& profile);

// Percent of questions answered correctly, 0..100.
double accuracy_percent(const std::vector<GradedResult>& results);

// Greedy zero-shot evaluation of an endpoint.
struct GreedyEval {
  GenBatch batch;
  std::vector<GradedResult> results;
  double accuracy = 0.0;
};
GreedyEval greedy_accuracy(ModelBackend& backend, const EndpointSpec& spec,
                           const DatasetManifest& test, const ExtractionProfile& profile,
                           bool with_cot = true);

// Empirical any-correct rate over exactly k samples per question. Throws
// DataError if any question has a different number of samples.
double pass_at_k(const std::map<std::string, std::vector<AnswerKey>>& samples,
                 const std::map<std::string, AnswerKey>& gold, int k);

// Gold keys of a manifest, normalized under `profile`.
std::map<std::string, AnswerKey> gold_keys(const DatasetManifest& gold,
                                           const ExtractionProfile& profile);
std::map<std::string, std::vector<AnswerKey>> group_answers(const GenBatch& batch);

// 100 * (weak_to_strong - weak_floor) / (strong_ceiling - weak_floor).
// Throws std::domain_error when the floor equals the ceiling.
double pgr(double weak_floor, double weak_to_strong, double strong_ceiling);

struct LevelStats {
  std::size_t count = 0;
  std::size_t correct = 0;
  double percent = 0.0;
};

// Per-level accuracy in declared-level order. Throws DataError when the
// manifest declares no levels or a result id is unknown.
std::vector<std::pair<std::string, LevelStats>> accuracy_by_level(
    const std::vector<GradedResult>& results, const DatasetManifest& manifest);

// ROUGE-L F1 over whitespace tokens; 0 when either side is empty.
double rouge_l(std::string_view a, std::string_view b);
std::vector<std::string> whitespace_tokens(std::string_view text);
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Greedy first-fit clustering: each sample joins the first cluster whose
// representative has rouge_l >= threshold, else opens a new cluster.
std::size_t cluster_distinct(const std::vector<std::string>& samples, double threshold = 0.7);

struct DiversityHistogram {
  double threshold = 0.7;
  std::map<std::size_t, std::size_t> bins;  // cluster count -> question frequency

  std::size_t total() const;
  std::string to_csv() const;  // "clusters,frequency" rows for 1..max_n
  std::size_t max_n = 0;
};

DiversityHistogram diversity_histogram(const std::map<std::string, std::vector<std::string>>& samples,
                                       double threshold = 0.7);

// Process-level judge.
std::string build_process_eval_prompt(std::string_view question, std::string_view solution);

enum class Verdict { Correct, Wrong };

struct ProcessJudgement {
  std::string question_id;
  Verdict verdict = Verdict::Wrong;
  std::optional<int> first_error_step;  // nullopt means N/A
  std::string evaluation;
  std::string raw;
};

struct JudgeParse {
  std::optional<ProcessJudgement> judgement;
  std::string error;  // set when parsing failed
};

// Extracts the three labeled fields. Fails on a missing section, a verdict
// other than correct/wrong, or a verdict inconsistent with the error step.
JudgeParse parse_process_eval(std::string_view judge_text, const std::string& question_id = {});

struct ProcessEvalSummary {
  std::size_t judged = 0;
  std::size_t correct = 0;
  std::size_t parse_failures = 0;
  std::size_t endpoint_failures = 0;
  double percent = 0.0;
};

// Judges up to `max_items` records drawn with `seed` through a judge endpoint.
ProcessEvalSummary process_eval(ModelBackend& judge, const EndpointSpec& spec,
                                const std::vector<std::pair<std::string, std::string>>& items,
                                const std::vector<std::string>& ids, std::size_t max_items,
                                std::uint64_t seed);

// "+3.57", "+0.00", "-2.00": signed difference to two decimals.
std::string format_delta(double current, double baseline);

struct EvalReport {
  std::string endpoint_id;
  std::string role;
  std::string dataset;
  double greedy_accuracy = 0.0;
  std::optional<std::pair<int, double>> pass_at_k;
  std::vector<std::pair<std::string, LevelStats>> per_level;
  std::map<std::string, double> baselines;
  std::size_t failures = 0;
  std::size_t questions = 0;
};

std::string report_to_json(const std::vector<EvalReport>& reports,
                           const std::optional<double>& pgr_value);
// Human-readable table with deltas against each report's baselines.
std::string report_deltas(const std::vector<EvalReport>& reports);

}  // namespace w2s
