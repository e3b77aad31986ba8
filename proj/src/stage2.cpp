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

#include "w2s/stage2.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "json.hpp"
#include "w2s/digest.hpp"
#include "w2s/error.hpp"
#include "w2s/stage1.hpp"

namespace w2s {

GenBatch sample_for_confidence(ModelBackend& backend, const EndpointSpec& spec,
                               const DatasetManifest& questions, int n, double temperature,
                               const ExtractionProfile& profile) {
  if (questions.has_gold)
    throw DataError("sample_for_confidence: expected the gold-stripped question set");
  if (n < 2) throw DataError("sample_for_confidence: n must be >= 2");
  return generate(backend, spec, zero_shot_requests(questions, PromptStyle::ZeroShotCot),
                  SamplingConfig::sampled(n, temperature), profile);
}

ConfidenceSummary compute_confidence(const std::string& question_id,
                                     std::vector<GenResponse> samples, double tau) {
  ConfidenceSummary s;
  s.question_id = question_id;
  s.samples = std::move(samples);
  const auto n = s.samples.size();
  if (n == 0) return s;

  // Equivalence classes in first-seen order: representative index, count.
  std::vector<std::pair<std::size_t, int>> classes;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& key = s.samples[i].answer;
    if (!key.parseable()) continue;
    auto it = std::find_if(classes.begin(), classes.end(), [&](const auto& c) {
      return answers_equal(s.samples[c.first].answer, key);
    });
    if (it == classes.end()) {
      classes.emplace_back(i, 1);
    } else {
      ++it->second;
    }
  }
  if (classes.empty()) return s;

  int best = 0, ties = 0;
  std::size_t rep = 0;
  for (const auto& [idx, count] : classes) {
    if (count > best) {
      best = count;
      ties = 1;
      rep = idx;
    } else if (count == best) {
      ++ties;
    }
  }
  s.modal_count = best;
  s.confidence = static_cast<double>(best) / static_cast<double>(n);
  if (ties == 1) s.modal_answer = s.samples[rep].answer;
  s.confident = ties == 1 && static_cast<double>(best) >= tau * static_cast<double>(n) - 1e-9;
  return s;
}

SamplePartition partition_samples(const ConfidenceSummary& summary) {
  if (!summary.confident || !summary.modal_answer)
    throw DataError(fmt::format("partition_samples: question \"{}\" is not confident",
                                summary.question_id));
  SamplePartition p;
  for (const auto& r : summary.samples)
    (answers_equal(r.answer, *summary.modal_answer) ? p.plus : p.minus).push_back(r);
  return p;
}

std::string_view to_string(PairRecipe r) {
  return r == PairRecipe::WeakInPair ? "weak_in_pair" : "self_generated";
}

PairRecipe parse_pair_recipe(const std::string& s) {
  if (s == "weak_in_pair") return PairRecipe::WeakInPair;
  if (s == "self_generated") return PairRecipe::SelfGenerated;
  throw DataError(fmt::format("unknown pair recipe '{}'", s));
}

std::string_view to_string(ResponseSource s) { return s == ResponseSource::Weak ? "weak" : "strong"; }

std::string_view to_string(SkipReason r) {
  switch (r) {
    case SkipReason::Unconfident: return "unconfident";
    case SkipReason::EmptyMinus: return "a_minus_empty";
    case SkipReason::WeakMissing: return "weak_missing";
    case SkipReason::SamplingFailed: return "sampling_failed";
  }
  return "unconfident";
}

PairDecision build_pair(const ConfidenceSummary& summary, const std::string& question_text,
                        const GenResponse* weak_response, Rng& rng, PairRecipe recipe) {
  if (!summary.confident) return {std::nullopt, SkipReason::Unconfident};
  const auto part = partition_samples(summary);
  auto draw = [&](const std::vector<GenResponse>& from) -> const GenResponse& {
    return from[uniform_index(rng, from.size())];
  };

  PreferencePair p;
  p.question_id = summary.question_id;
  p.question = question_text;
  p.confidence = summary.confidence;
  p.a_plus = *summary.modal_answer;

  if (recipe == PairRecipe::SelfGenerated) {
    if (part.minus.empty()) return {std::nullopt, SkipReason::EmptyMinus};
    p.chosen = draw(part.plus).text;
    p.rejected = draw(part.minus).text;
    p.chosen_source = p.rejected_source = ResponseSource::Strong;
    return {std::move(p), std::nullopt};
  }

  if (weak_response == nullptr) return {std::nullopt, SkipReason::WeakMissing};
  if (answers_equal(weak_response->answer, p.a_plus)) {
    if (part.minus.empty()) return {std::nullopt, SkipReason::EmptyMinus};
    p.chosen = weak_response->text;
    p.chosen_source = ResponseSource::Weak;
    p.rejected = draw(part.minus).text;
    p.rejected_source = ResponseSource::Strong;
  } else {
    p.chosen = draw(part.plus).text;
    p.chosen_source = ResponseSource::Strong;
    p.rejected = weak_response->text;
    p.rejected_source = ResponseSource::Weak;
  }
  return {std::move(p), std::nullopt};
}

PairBuildResult build_preference_pairs(const DatasetManifest& questions, const GenBatch& samples,
                                       const GenBatch& weak, int n, double tau, PairRecipe recipe,
                                       std::uint64_t seed) {
  if (questions.has_gold)
    throw DataError("build_preference_pairs: expected the gold-stripped question set");
  std::unordered_map<std::string, std::vector<GenResponse>> grouped;
  for (const auto& r : samples.responses) grouped[r.question_id].push_back(r);
  std::unordered_map<std::string, const GenResponse*> weak_first;
  for (const auto& r : weak.responses) weak_first.try_emplace(r.question_id, &r);

  PairBuildResult result;
  for (const auto& q : questions.questions) {
    auto it = grouped.find(q.id);
    if (it == grouped.end() || static_cast<int>(it->second.size()) != n) {
      result.skipped[SkipReason::SamplingFailed].push_back(q.id);
      continue;
    }
    auto summary = compute_confidence(q.id, std::move(it->second), tau);
    Rng rng(derive_seed(seed, "pair:" + q.id));
    auto wit = weak_first.find(q.id);
    auto decision =
        build_pair(summary, q.text, wit == weak_first.end() ? nullptr : wit->second, rng, recipe);
    if (decision.pair) {
      result.pairs.push_back(std::move(*decision.pair));
    } else {
      result.skipped[*decision.skip].push_back(q.id);
    }
    result.summaries.push_back(std::move(summary));
  }
  std::stable_sort(result.pairs.begin(), result.pairs.end(),
                   [](const auto& a, const auto& b) { return a.question_id < b.question_id; });
  return result;
}

std::string serialize_preference_pairs(std::vector<PreferencePair> pairs) {
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return a.question_id < b.question_id; });
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::json j;
    j["id"] = p.question_id;
    j["question"] = p.question;
    j["chosen"] = p.chosen;
    j["rejected"] = p.rejected;
    j["chosen_source"] = std::string(to_string(p.chosen_source));
    j["rejected_source"] = std::string(to_string(p.rejected_source));
    j["confidence"] = p.confidence;
    j["a_plus"] = p.a_plus.canonical;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<PreferencePair> parse_preference_pairs(const std::string& jsonl) {
  auto source = [](const std::string& s) {
    if (s == "weak") return ResponseSource::Weak;
    if (s == "strong") return ResponseSource::Strong;
    throw DataError(fmt::format("unknown response source '{}'", s));
  };
  std::vector<PreferencePair> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      PreferencePair p;
      p.question_id = j.at("id").get<std::string>();
      p.question = j.at("question").get<std::string>();
      p.chosen = j.at("chosen").get<std::string>();
      p.rejected = j.at("rejected").get<std::string>();
      p.chosen_source = source(j.at("chosen_source").get<std::string>());
      p.rejected_source = source(j.at("rejected_source").get<std::string>());
      p.confidence = j.at("confidence").get<double>();
      p.a_plus = normalize_answer(j.at("a_plus").get<std::string>());
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("preference JSONL line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

std::string serialize_skip_report(const PairBuildResult& result) {
  nlohmann::json j;
  j["emitted"] = result.pairs.size();
  for (auto r : {SkipReason::Unconfident, SkipReason::EmptyMinus, SkipReason::WeakMissing,
                 SkipReason::SamplingFailed}) {
    auto it = result.skipped.find(r);
    j["skipped"][std::string(to_string(r))] = it == result.skipped.end() ? 0 : it->second.size();
  }
  return j.dump(2) + "\n";
}

void emit_preference_dataset(const PairBuildResult& result, const std::filesystem::path& jsonl_path,
                             const std::filesystem::path& skip_report_path) {
  write_file_atomic(jsonl_path, serialize_preference_pairs(result.pairs));
  write_file_atomic(skip_report_path, serialize_skip_report(result));
}

std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path) {
  return parse_preference_pairs(read_file(path));
}

std::vector<std::string> validate_preference_pairs(const std::vector<PreferencePair>& pairs,
                                                   const ExtractionProfile& profile, double tau,
                                                   PairRecipe recipe) {
  std::vector<std::string> problems;
  for (const auto& p : pairs) {
    const auto chosen = extract_final_answer(p.chosen, profile);
    const auto rejected = extract_final_answer(p.rejected, profile);
    if (!answers_equal(chosen, p.a_plus))
      problems.push_back(fmt::format("{}: chosen answer '{}' != a+ '{}'", p.question_id,
                                     chosen.canonical, p.a_plus.canonical));
    if (answers_equal(rejected, p.a_plus))
      problems.push_back(fmt::format("{}: rejected answer equals a+ '{}'", p.question_id,
                                     p.a_plus.canonical));
    if (p.confidence < tau - 1e-9)
      problems.push_back(fmt::format("{}: confidence {} below tau {}", p.question_id,
                                     p.confidence, tau));
    const int weak_slots = (p.chosen_source == ResponseSource::Weak) +
                           (p.rejected_source == ResponseSource::Weak);
    if (recipe == PairRecipe::WeakInPair && weak_slots != 1)
      problems.push_back(fmt::format("{}: expected exactly one weak response", p.question_id));
    if (recipe == PairRecipe::SelfGenerated && weak_slots != 0)
      problems.push_back(fmt::format("{}: self-generated pair contains a weak response",
                                     p.question_id));
  }
  return problems;
}

}  // namespace w2s
