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

#include "w2s/stage1.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "json.hpp"
#include "w2s/digest.hpp"
#include "w2s/error.hpp"
#include "w2s/rng.hpp"

namespace w2s {
namespace {

void require_gold_free(const DatasetManifest& questions, const char* op) {
  if (questions.has_gold)
    throw DataError(fmt::format("{}: manifest '{}' still carries gold answers; curation only "
                                "accepts the gold-stripped question set",
                                op, questions.name));
}

// First sample of each question, keyed by id.
std::unordered_map<std::string, const GenResponse*> first_samples(const GenBatch& batch) {
  std::unordered_map<std::string, const GenResponse*> out;
  for (const auto& r : batch.responses) out.try_emplace(r.question_id, &r);
  return out;
}

std::set<std::string> covered_ids(const GenBatch& batch) {
  std::set<std::string> ids;
  for (const auto& r : batch.responses) ids.insert(r.question_id);
  for (const auto& f : batch.failures) ids.insert(f.question_id);
  return ids;
}

}  // namespace

std::string_view to_string(PromptStyle style) {
  return style == PromptStyle::Standard ? "standard" : "zero_shot_cot";
}

PromptStyle parse_prompt_style(const std::string& s) {
  if (s == "standard") return PromptStyle::Standard;
  if (s == "zero_shot_cot" || s == "cot") return PromptStyle::ZeroShotCot;
  throw DataError(fmt::format("unknown prompt style '{}'", s));
}

std::vector<PromptRequest> zero_shot_requests(const DatasetManifest& questions, PromptStyle style) {
  std::vector<PromptRequest> out;
  out.reserve(questions.size());
  for (const auto& q : questions.questions) {
    auto prompts = build_zero_shot_prompts(q, style == PromptStyle::ZeroShotCot);
    PromptRequest r{q.id, prompts.reasoning_prompt, std::nullopt};
    if (style == PromptStyle::ZeroShotCot) r.answer_cue = kAnswerCue;
    out.push_back(std::move(r));
  }
  return out;
}

GenBatch produce_weak_data(ModelBackend& backend, const EndpointSpec& spec,
                           const DatasetManifest& questions, const ExtractionProfile& profile,
                           PromptStyle style, const SamplingConfig& cfg) {
  require_gold_free(questions, "produce_weak_data");
  return generate(backend, spec, zero_shot_requests(questions, style), cfg, profile);
}

std::vector<Demonstration> select_demonstrations(const GenBatch& weak,
                                                 const DatasetManifest& questions, std::size_t k,
                                                 std::uint64_t seed) {
  require_gold_free(questions, "select_demonstrations");
  auto firsts = first_samples(weak);
  // Candidates in manifest order.
  std::vector<std::pair<const Question*, const GenResponse*>> candidates;
  for (const auto& q : questions.questions)
    if (auto it = firsts.find(q.id); it != firsts.end()) candidates.emplace_back(&q, it->second);
  if (k > candidates.size())
    throw DataError(fmt::format("select_demonstrations: k={} exceeds the {} weak responses", k,
                                candidates.size()));
  Rng rng(derive_seed(seed, "demonstrations"));
  auto picks = sample_without_replacement(candidates.size(), k, rng);
  std::sort(picks.begin(), picks.end());
  std::vector<Demonstration> demos;
  for (auto i : picks) demos.push_back({candidates[i].first->text, candidates[i].second->text});
  return demos;
}

std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path) {
  std::vector<Demonstration> demos;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      demos.push_back({j.at("question").get<std::string>(), j.at("response").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}: line {}: {}", path.string(), lineno, e.what()));
    }
  }
  return demos;
}

void save_demonstrations(const std::vector<Demonstration>& demos,
                         const std::filesystem::path& path) {
  std::string out;
  for (const auto& d : demos)
    out += nlohmann::json{{"question", d.question}, {"response", d.response}}.dump() + "\n";
  write_file_atomic(path, out);
}

GenBatch produce_icl_data(ModelBackend& backend, const EndpointSpec& spec,
                          const DatasetManifest& questions, const std::vector<Demonstration>& demos,
                          std::size_t k, const ExtractionProfile& profile,
                          const SamplingConfig& cfg) {
  require_gold_free(questions, "produce_icl_data");
  std::vector<PromptRequest> requests;
  requests.reserve(questions.size());
  for (const auto& q : questions.questions)
    requests.push_back({q.id, build_icl_prompt(q, demos, k), std::nullopt});
  return generate(backend, spec, requests, cfg, profile);
}

Selection consistency_select(const GenBatch& weak, const GenBatch& icl) {
  const auto weak_ids = covered_ids(weak), icl_ids = covered_ids(icl);
  if (weak_ids != icl_ids) {
    std::vector<std::string> diff;
    std::set_symmetric_difference(weak_ids.begin(), weak_ids.end(), icl_ids.begin(),
                                  icl_ids.end(), std::back_inserter(diff));
    throw DataError(fmt::format("consistency_select: weak and icl batches cover different "
                                "questions ({} mismatched, e.g. \"{}\")",
                                diff.size(), diff.front()));
  }
  auto icl_first = first_samples(icl);
  std::set<std::string> seen;
  Selection sel;
  for (const auto& w : weak.responses) {
    if (!seen.insert(w.question_id).second) continue;
    auto it = icl_first.find(w.question_id);
    if (it == icl_first.end()) {
      sel.excluded.push_back(w.question_id);
      continue;
    }
    CandidatePair pair{w.question_id, w, *it->second, answers_equal(w.answer, it->second->answer)};
    (pair.consistent ? sel.selected : sel.pool).push_back(std::move(pair));
  }
  for (const auto& f : weak.failures)
    if (seen.insert(f.question_id).second) sel.excluded.push_back(f.question_id);
  return sel;
}

Selection augment_selection(const Selection& selection, std::size_t target_n, std::uint64_t seed) {
  Selection out = selection;
  const std::size_t have = selection.size();
  if (target_n <= have) {
    out.shortfall = 0;
    return out;
  }
  const std::size_t need = target_n - have;
  const std::size_t take = std::min(need, selection.pool.size());
  Rng rng(derive_seed(seed, "augment_selection"));
  auto picks = sample_without_replacement(selection.pool.size(), take, rng);
  std::sort(picks.begin(), picks.end());
  std::vector<bool> drawn(selection.pool.size(), false);
  for (auto i : picks) {
    out.augmented.push_back(selection.pool[i]);
    drawn[i] = true;
  }
  out.pool.clear();
  for (std::size_t i = 0; i < selection.pool.size(); ++i)
    if (!drawn[i]) out.pool.push_back(selection.pool[i]);
  out.shortfall = need - take;
  return out;
}

std::string serialize_selection(const Selection& s) {
  auto ids = [](const std::vector<CandidatePair>& v) {
    std::vector<std::string> out;
    for (const auto& p : v) out.push_back(p.question_id);
    return out;
  };
  nlohmann::json j;
  j["selected"] = ids(s.selected);
  j["augmented"] = ids(s.augmented);
  j["pool"] = ids(s.pool);
  j["excluded"] = s.excluded;
  j["shortfall"] = s.shortfall;
  return j.dump(1) + "\n";
}

Selection parse_selection(const std::string& text, const GenBatch& weak, const GenBatch& icl) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("selection: malformed JSON ({})", e.what()));
  }
  auto wf = first_samples(weak), icf = first_samples(icl);
  auto pairs = [&](const char* key) {
    std::vector<CandidatePair> out;
    for (const auto& idj : j.at(key)) {
      auto id = idj.get<std::string>();
      auto a = wf.find(id), b = icf.find(id);
      if (a == wf.end() || b == icf.end())
        throw DataError(fmt::format("selection: id \"{}\" missing from generation batches", id));
      out.push_back({id, *a->second, *b->second, answers_equal(a->second->answer, b->second->answer)});
    }
    return out;
  };
  Selection s;
  s.selected = pairs("selected");
  s.augmented = pairs("augmented");
  s.pool = pairs("pool");
  s.excluded = j.at("excluded").get<std::vector<std::string>>();
  s.shortfall = j.at("shortfall").get<std::size_t>();
  return s;
}

std::string_view to_string(SftVariant v) {
  switch (v) {
    case SftVariant::FullWeak: return "full_weak";
    case SftVariant::WeakFt: return "weak_ft";
    case SftVariant::IclFt: return "icl_ft";
    case SftVariant::HybridFt: return "hybrid_ft";
  }
  return "weak_ft";
}

SftVariant parse_sft_variant(const std::string& s) {
  for (auto v : {SftVariant::FullWeak, SftVariant::WeakFt, SftVariant::IclFt, SftVariant::HybridFt})
    if (to_string(v) == s) return v;
  throw DataError(fmt::format("unknown SFT variant '{}'", s));
}

SftDataset build_sft_dataset(SftVariant variant, int round, const DatasetManifest& questions,
                             const GenBatch& weak, const Selection& selection) {
  require_gold_free(questions, "build_sft_dataset");
  std::unordered_map<std::string, const Question*> by_id;
  for (const auto& q : questions.questions) by_id.emplace(q.id, &q);
  auto text_of = [&](const std::string& id) -> const std::string& {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw DataError(fmt::format("build_sft_dataset: id \"{}\" not in manifest '{}'", id,
                                  questions.name));
    return it->second->text;
  };

  SftDataset ds;
  ds.variant = variant;
  ds.round = round;
  const std::string vname(to_string(variant));
  auto add = [&](const GenResponse& r) {
    ds.records.push_back({r.question_id, text_of(r.question_id), r.text, vname, round, r.origin});
  };
  auto add_side = [&](bool weak_side) {
    for (const auto* bucket : {&selection.selected, &selection.augmented})
      for (const auto& p : *bucket) add(weak_side ? p.weak : p.icl);
  };

  switch (variant) {
    case SftVariant::FullWeak: {
      std::set<std::string> seen;
      for (const auto& r : weak.responses)
        if (seen.insert(r.question_id).second) add(r);
      break;
    }
    case SftVariant::WeakFt: add_side(true); break;
    case SftVariant::IclFt: add_side(false); break;
    case SftVariant::HybridFt:
      add_side(true);
      add_side(false);
      break;
  }
  if (ds.records.empty())
    throw DataError(fmt::format("refusing to emit an empty {} dataset for round {}", vname, round));
  std::set<std::string> origins;
  for (const auto& r : ds.records) origins.insert(r.origin);
  ds.provenance.assign(origins.begin(), origins.end());
  return ds;
}

std::string serialize_sft(const SftDataset& ds) {
  std::string out;
  for (const auto& r : ds.records) {
    nlohmann::json j;
    j["id"] = r.id;
    j["question"] = r.question;
    j["response"] = r.response;
    j["variant"] = r.variant;
    j["round"] = r.round;
    j["origin"] = r.origin;
    out += j.dump() + "\n";
  }
  return out;
}

void emit_sft_dataset(const SftDataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_sft(ds));
}

std::vector<SftRecord> load_sft_records(const std::filesystem::path& path) {
  std::vector<SftRecord> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                     j.at("response").get<std::string>(), j.at("variant").get<std::string>(),
                     j.at("round").get<int>(), j.at("origin").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}: line {}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

std::string round_key(int round, const std::string& role) {
  return fmt::format("r{}.{}", round, role);
}

std::string model_role(const std::string& base, int round) {
  return fmt::format("{}.r{}", base, round);
}

RoundPlan plan_next_round(const RoundState& state, int rounds_budget,
                          const std::vector<std::string>& registered_roles) {
  const int r = state.round;
  const std::string hybrid_key = round_key(r, "sft.hybrid_ft");
  if (!state.dataset_paths.count(hybrid_key))
    throw DependencyError(fmt::format("round {} has no emitted hybrid_ft dataset ({})", r, hybrid_key));

  RoundPlan plan;
  if (r >= rounds_budget) {
    plan.stop = true;
    plan.final_hybrid = state.dataset_paths.at(hybrid_key);
    plan.steps.push_back(fmt::format(
        "stop: fine-tune on {} and register the result as role 'm_plus'", plan.final_hybrid));
    return plan;
  }
  auto has = [&](const std::string& role) {
    return std::find(registered_roles.begin(), registered_roles.end(), role) !=
               registered_roles.end() ||
           state.endpoint_ids.count(role) != 0;
  };
  for (const char* base : {"weak_ft", "icl_ft"}) {
    const std::string role = model_role(base, r);
    if (!has(role))
      throw DependencyError(fmt::format("round {} needs endpoint role '{}' (fine-tune on {})",
                                        r + 1, role,
                                        state.dataset_paths.count(round_key(r, std::string("sft.") + base))
                                            ? state.dataset_paths.at(round_key(r, std::string("sft.") + base))
                                            : std::string("its round dataset")));
  }
  plan.next_round = r + 1;
  plan.jobs.push_back({model_role("weak_ft", r), round_key(r + 1, "weak"), PromptStyle::ZeroShotCot});
  plan.jobs.push_back({model_role("icl_ft", r), round_key(r + 1, "icl"), PromptStyle::ZeroShotCot});
  plan.steps = {"select", "emit weak_ft", "emit icl_ft", "emit hybrid_ft"};
  return plan;
}

}  // namespace w2s
