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

#include "w2s/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "json.hpp"
#include "w2s/error.hpp"
#include "w2s/rng.hpp"
#include "w2s/stage1.hpp"

namespace w2s {

std::map<std::string, AnswerKey> gold_keys(const DatasetManifest& gold,
                                           const ExtractionProfile& profile) {
  if (!gold.has_gold)
    throw DataError(fmt::format("manifest '{}' carries no gold answers", gold.name));
  std::map<std::string, AnswerKey> out;
  for (const auto& q : gold.questions) out.emplace(q.id, normalize_answer(*q.gold_answer, profile));
  return out;
}

std::map<std::string, std::vector<AnswerKey>> group_answers(const GenBatch& batch) {
  std::map<std::string, std::vector<AnswerKey>> out;
  for (const auto& r : batch.responses) out[r.question_id].push_back(r.answer);
  return out;
}

std::vector<GradedResult> grade_responses(const GenBatch& batch, const DatasetManifest& gold,
                                          const ExtractionProfile& profile) {
  const auto keys = gold_keys(gold, profile);
  std::unordered_map<std::string, const GenResponse*> first;
  for (const auto& r : batch.responses) first.try_emplace(r.question_id, &r);
  std::vector<GradedResult> out;
  out.reserve(gold.size());
  for (const auto& q : gold.questions) {
    GradedResult g{q.id, false, false};
    if (auto it = first.find(q.id); it != first.end()) {
      g.answered = true;
      g.correct = answers_equal(it->second->answer, keys.at(q.id));
    }
    out.push_back(g);
  }
  return out;
}

double accuracy_percent(const std::vector<GradedResult>& results) {
  if (results.empty()) return 0.0;
  auto correct = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.correct; });
  return 100.0 * static_cast<double>(correct) / static_cast<double>(results.size());
}

GreedyEval greedy_accuracy(ModelBackend& backend, const EndpointSpec& spec,
                           const DatasetManifest& test, const ExtractionProfile& profile,
                           bool with_cot) {
  if (!test.has_gold) throw DataError(fmt::format("test manifest '{}' has no gold", test.name));
  GreedyEval e;
  // The prompt never contains the gold answer; only the grader reads it.
  e.batch = generate(backend, spec,
                     zero_shot_requests(strip_gold(test),
                                        with_cot ? PromptStyle::ZeroShotCot : PromptStyle::Standard),
                     SamplingConfig::greedy(), profile);
  e.results = grade_responses(e.batch, test, profile);
  e.accuracy = accuracy_percent(e.results);
  return e;
}

double pass_at_k(const std::map<std::string, std::vector<AnswerKey>>& samples,
                 const std::map<std::string, AnswerKey>& gold, int k) {
  if (k < 1) throw DataError("pass_at_k: k must be >= 1");
  if (gold.empty()) return 0.0;
  std::size_t solved = 0;
  for (const auto& [id, key] : gold) {
    auto it = samples.find(id);
    const std::size_t have = it == samples.end() ? 0 : it->second.size();
    if (have != static_cast<std::size_t>(k))
      throw DataError(fmt::format("pass_at_k: question \"{}\" has {} samples, expected {}", id,
                                  have, k));
    if (std::any_of(it->second.begin(), it->second.end(),
                    [&](const AnswerKey& a) { return answers_equal(a, key); }))
      ++solved;
  }
  return 100.0 * static_cast<double>(solved) / static_cast<double>(gold.size());
}

double pgr(double weak_floor, double weak_to_strong, double strong_ceiling) {
  const double gap = strong_ceiling - weak_floor;
  if (gap == 0.0) throw std::domain_error("PGR undefined: strong ceiling equals weak floor");
  return 100.0 * (weak_to_strong - weak_floor) / gap;
}

std::vector<std::pair<std::string, LevelStats>> accuracy_by_level(
    const std::vector<GradedResult>& results, const DatasetManifest& manifest) {
  if (manifest.declared_levels.empty())
    throw DataError(fmt::format("manifest '{}' declares no levels", manifest.name));
  std::unordered_map<std::string, const Question*> by_id;
  for (const auto& q : manifest.questions) by_id.emplace(q.id, &q);

  std::vector<std::pair<std::string, LevelStats>> table;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& l : manifest.declared_levels) {
    slot.emplace(l, table.size());
    table.push_back({l, {}});
  }
  for (const auto& r : results) {
    auto it = by_id.find(r.question_id);
    if (it == by_id.end())
      throw DataError(fmt::format("accuracy_by_level: unknown id \"{}\"", r.question_id));
    const std::string level = it->second->level.value_or("none");
    if (!slot.count(level)) {
      slot.emplace(level, table.size());
      table.push_back({level, {}});
    }
    auto& s = table[slot.at(level)].second;
    ++s.count;
    if (r.correct) ++s.correct;
  }
  for (auto& [l, s] : table)
    s.percent = s.count ? 100.0 * static_cast<double>(s.correct) / static_cast<double>(s.count) : 0.0;
  return table;
}

// ---------------------------------------------------------------------------
// ROUGE-L

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  const auto& shorter = a.size() < b.size() ? a : b;
  const auto& longer = a.size() < b.size() ? b : a;
  std::vector<std::size_t> prev(shorter.size() + 1, 0), cur(shorter.size() + 1, 0);
  for (const auto& tok : longer) {
    for (std::size_t j = 1; j <= shorter.size(); ++j)
      cur[j] = tok == shorter[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[shorter.size()];
}

double rouge_l(std::string_view a, std::string_view b) {
  const auto ta = whitespace_tokens(a), tb = whitespace_tokens(b);
  if (ta.empty() || tb.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(ta, tb));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(ta.size());
  const double r = lcs / static_cast<double>(tb.size());
  return 2.0 * p * r / (p + r);
}

std::size_t cluster_distinct(const std::vector<std::string>& samples, double threshold) {
  std::vector<const std::string*> reps;
  for (const auto& s : samples) {
    bool placed = false;
    for (const auto* rep : reps) {
      if (rouge_l(*rep, s) >= threshold) {
        placed = true;
        break;
      }
    }
    if (!placed) reps.push_back(&s);
  }
  return reps.size();
}

std::size_t DiversityHistogram::total() const {
  std::size_t t = 0;
  for (const auto& [c, f] : bins) t += f;
  return t;
}

std::string DiversityHistogram::to_csv() const {
  std::string out = "clusters,frequency\n";
  std::size_t top = max_n;
  if (!bins.empty()) top = std::max(top, bins.rbegin()->first);
  for (std::size_t c = 1; c <= top; ++c) {
    auto it = bins.find(c);
    out += fmt::format("{},{}\n", c, it == bins.end() ? 0 : it->second);
  }
  return out;
}

DiversityHistogram diversity_histogram(const std::map<std::string, std::vector<std::string>>& samples,
                                       double threshold) {
  DiversityHistogram h;
  h.threshold = threshold;
  std::optional<std::size_t> n;
  for (const auto& [id, texts] : samples) {
    if (texts.empty()) throw DataError(fmt::format("diversity: question \"{}\" has no samples", id));
    if (n && *n != texts.size())
      throw DataError(fmt::format("diversity: question \"{}\" has {} samples, expected {}", id,
                                  texts.size(), *n));
    n = texts.size();
    ++h.bins[cluster_distinct(texts, threshold)];
  }
  h.max_n = n.value_or(0);
  return h;
}

// ---------------------------------------------------------------------------
// Process-level judge

std::string build_process_eval_prompt(std::string_view question, std::string_view solution) {
  std::string out;
  out += "Question:\n";
  out += question;
  out += "\n\nStudent Solution:\n";
  out += solution;
  out +=
      "\n\n"
      "Your task involves three parts:\n"
      "1. **Step-by-step Evaluation:** Go through the student solution carefully and identify "
      "key errors and potential misunderstandings that led to the incorrect solution.\n"
      "2. **Final Judgement:**  Provide an overall judgement on the correctness of the student's "
      "solution.\n"
      "3. **First Error Step:** If the solution is incorrect, generate the step number where the "
      "first error occurs, otherwise generate N/A here.\n"
      "\n"
      "Here's the format I want:\n"
      "Step-by-step Evaluation: [Provide a step by step examination of the student solution and "
      "identify key errors and misunderstandings here.]\n"
      "Final Judgement: [Insert only **correct** or **wrong** here]\n"
      "First Error Step: [Insert either N/A or the step number where the first error occurs]\n"
      "\n"
      "Please follow this format without any additional introductory or concluding statements.";
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Position just past "label" plus any markup and the colon, or npos.
std::size_t find_label(const std::string& lowered, std::string_view label, std::size_t from = 0) {
  std::size_t pos = lowered.find(label, from);
  if (pos == std::string::npos) return pos;
  std::size_t i = pos + label.size();
  while (i < lowered.size() && (lowered[i] == '*' || lowered[i] == ' ')) ++i;
  if (i >= lowered.size() || lowered[i] != ':') return std::string::npos;
  ++i;
  while (i < lowered.size() && (lowered[i] == '*' || lowered[i] == ' ')) ++i;
  return i;
}

std::string field_value(std::string_view text, std::size_t start) {
  std::size_t end = text.find('\n', start);
  std::string v(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
  std::string out;
  for (char c : v)
    if (c != '*' && c != '[' && c != ']' && c != '`') out += c;
  while (!out.empty() && (std::isspace(static_cast<unsigned char>(out.back())) || out.back() == '.'))
    out.pop_back();
  std::size_t b = 0;
  while (b < out.size() && std::isspace(static_cast<unsigned char>(out[b]))) ++b;
  return out.substr(b);
}

}  // namespace

JudgeParse parse_process_eval(std::string_view judge_text, const std::string& question_id) {
  const std::string lowered = lower(judge_text);
  const std::size_t eval_at = find_label(lowered, "step-by-step evaluation");
  if (eval_at == std::string::npos) return {std::nullopt, "missing 'Step-by-step Evaluation'"};
  const std::size_t verdict_at = find_label(lowered, "final judgement", eval_at);
  if (verdict_at == std::string::npos) return {std::nullopt, "missing 'Final Judgement'"};
  const std::size_t step_at = find_label(lowered, "first error step", verdict_at);
  if (step_at == std::string::npos) return {std::nullopt, "missing 'First Error Step'"};

  ProcessJudgement j;
  j.question_id = question_id;
  j.raw = std::string(judge_text);
  const std::size_t verdict_label = lowered.rfind("final judgement", verdict_at);
  std::size_t eval_end = verdict_label;
  while (eval_end > eval_at && (judge_text[eval_end - 1] == '*' || judge_text[eval_end - 1] == '\n' ||
                                judge_text[eval_end - 1] == ' '))
    --eval_end;
  j.evaluation = std::string(judge_text.substr(eval_at, eval_end - eval_at));

  const std::string verdict = lower(field_value(judge_text, verdict_at));
  if (verdict == "correct") {
    j.verdict = Verdict::Correct;
  } else if (verdict == "wrong") {
    j.verdict = Verdict::Wrong;
  } else {
    return {std::nullopt, fmt::format("unrecognized verdict '{}'", verdict)};
  }

  const std::string step = field_value(judge_text, step_at);
  if (lower(step) == "n/a" || lower(step) == "na") {
    j.first_error_step.reset();
  } else {
    std::size_t i = 0;
    while (i < step.size() && !std::isdigit(static_cast<unsigned char>(step[i]))) ++i;
    std::size_t k = i;
    while (k < step.size() && std::isdigit(static_cast<unsigned char>(step[k]))) ++k;
    if (i == k) return {std::nullopt, fmt::format("unrecognized first error step '{}'", step)};
    j.first_error_step = std::stoi(step.substr(i, k - i));
  }
  if ((j.verdict == Verdict::Correct) != !j.first_error_step.has_value())
    return {std::nullopt, "verdict and first error step disagree"};
  return {std::move(j), {}};
}

ProcessEvalSummary process_eval(ModelBackend& judge, const EndpointSpec& spec,
                                const std::vector<std::pair<std::string, std::string>>& items,
                                const std::vector<std::string>& ids, std::size_t max_items,
                                std::uint64_t seed) {
  if (ids.size() != items.size()) throw DataError("process_eval: ids and items differ in length");
  Rng rng(derive_seed(seed, "process_eval"));
  auto picks = sample_without_replacement(items.size(), std::min(max_items, items.size()), rng);
  std::sort(picks.begin(), picks.end());
  std::vector<PromptRequest> requests;
  for (auto i : picks)
    requests.push_back({ids[i], build_process_eval_prompt(items[i].first, items[i].second), std::nullopt});
  const auto batch = generate(judge, spec, requests, SamplingConfig::greedy(), ExtractionProfile{});

  ProcessEvalSummary s;
  s.endpoint_failures = batch.failures.size();
  for (const auto& r : batch.responses) {
    auto parsed = parse_process_eval(r.text, r.question_id);
    if (!parsed.judgement) {
      ++s.parse_failures;
      continue;
    }
    ++s.judged;
    if (parsed.judgement->verdict == Verdict::Correct) ++s.correct;
  }
  s.percent = s.judged ? 100.0 * static_cast<double>(s.correct) / static_cast<double>(s.judged) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Reporting

std::string format_delta(double current, double baseline) {
  // Round the difference at two decimals; guard against "-0.00".
  double d = std::round((current - baseline) * 100.0) / 100.0;
  if (d == 0.0) d = 0.0;
  return fmt::format("{}{:.2f}", d >= 0 ? "+" : "", d);
}

std::string report_to_json(const std::vector<EvalReport>& reports,
                           const std::optional<double>& pgr_value) {
  nlohmann::ordered_json root;
  root["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["role"] = r.role;
    j["endpoint"] = r.endpoint_id;
    j["dataset"] = r.dataset;
    j["questions"] = r.questions;
    j["greedy_accuracy"] = std::round(r.greedy_accuracy * 100.0) / 100.0;
    if (r.pass_at_k) {
      j["pass_at_k"] = {{"k", r.pass_at_k->first},
                        {"percent", std::round(r.pass_at_k->second * 100.0) / 100.0}};
    }
    nlohmann::ordered_json levels = nlohmann::ordered_json::object();
    for (const auto& [l, s] : r.per_level)
      levels[l] = {{"count", s.count}, {"correct", s.correct},
                   {"percent", std::round(s.percent * 100.0) / 100.0}};
    j["per_level"] = levels;
    nlohmann::ordered_json deltas = nlohmann::ordered_json::object();
    for (const auto& [name, value] : r.baselines)
      deltas[name] = {{"baseline", value}, {"delta", format_delta(r.greedy_accuracy, value)}};
    j["deltas"] = deltas;
    j["failures"] = r.failures;
    root["reports"].push_back(j);
  }
  if (pgr_value) root["pgr"] = std::round(*pgr_value * 100.0) / 100.0;
  return root.dump(2) + "\n";
}

std::string report_deltas(const std::vector<EvalReport>& reports) {
  std::string out = fmt::format("{:<14} {:<18} {:>10} {:>12}  {}\n", "role", "dataset", "accuracy",
                                "pass@k", "deltas");
  for (const auto& r : reports) {
    std::string pk = r.pass_at_k ? fmt::format("{:.2f}@{}", r.pass_at_k->second, r.pass_at_k->first)
                                 : std::string("-");
    std::string deltas;
    for (const auto& [name, value] : r.baselines) {
      if (!deltas.empty()) deltas += ", ";
      deltas += fmt::format("vs {} {:.2f} ({})", name, value, format_delta(r.greedy_accuracy, value));
    }
    out += fmt::format("{:<14} {:<18} {:>10.2f} {:>12}  {}\n", r.role, r.dataset, r.greedy_accuracy,
                       pk, deltas.empty() ? "-" : deltas);
    for (const auto& [l, s] : r.per_level)
      out += fmt::format("  level {:<8} n={:<6} {:>6.2f}\n", l, s.count, s.percent);
  }
  return out;
}

}  // namespace w2s
