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

#include "w2s/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "json.hpp"
#include "w2s/digest.hpp"
#include "w2s/error.hpp"
#include "w2s/rng.hpp"

namespace w2s {
namespace {

using nlohmann::json;

std::string scalar_to_string(const json& v, const char* field, std::size_t line) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw DataError(fmt::format("line {}: field '{}' must be a string", line, field));
}

std::optional<long long> as_integer(const std::string& s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

bool level_less(const std::string& a, const std::string& b) {
  auto ia = as_integer(a), ib = as_integer(b);
  if (ia && ib) return *ia < *ib;
  if (ia != ib && (ia || ib)) return ia.has_value();
  return a < b;
}

Question parse_question(const std::string& line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("line {}: malformed JSON ({})", lineno, e.what()));
  }
  if (!j.is_object()) throw DataError(fmt::format("line {}: expected a JSON object", lineno));
  if (!j.contains("id") || !j.contains("text"))
    throw DataError(fmt::format("line {}: missing required field 'id' or 'text'", lineno));
  Question q;
  q.id = scalar_to_string(j["id"], "id", lineno);
  if (!j["text"].is_string())
    throw DataError(fmt::format("line {}: field 'text' must be a string", lineno));
  q.text = j["text"].get<std::string>();
  if (j.contains("gold_answer") && !j["gold_answer"].is_null())
    q.gold_answer = scalar_to_string(j["gold_answer"], "gold_answer", lineno);
  if (j.contains("level") && !j["level"].is_null())
    q.level = scalar_to_string(j["level"], "level", lineno);
  if (j.contains("source") && j["source"].is_string()) q.source = j["source"].get<std::string>();
  return q;
}

}  // namespace

void check_manifest(const DatasetManifest& m) {
  std::unordered_set<std::string> seen;
  std::size_t with_gold = 0;
  for (const auto& q : m.questions) {
    if (!seen.insert(q.id).second)
      throw DataError(fmt::format("manifest '{}': duplicate id \"{}\"", m.name, q.id));
    if (q.gold_answer) ++with_gold;
    if (q.level && std::find(m.declared_levels.begin(), m.declared_levels.end(), *q.level) ==
                       m.declared_levels.end())
      throw DataError(fmt::format("manifest '{}': question \"{}\" has undeclared level '{}'",
                                  m.name, q.id, *q.level));
  }
  if (with_gold != 0 && with_gold != m.questions.size())
    throw DataError(fmt::format("manifest '{}': mixed gold presence ({} of {} questions)",
                                m.name, with_gold, m.questions.size()));
  if (m.has_gold != (with_gold != 0 && with_gold == m.questions.size()) && !m.questions.empty())
    throw DataError(fmt::format("manifest '{}': has_gold flag disagrees with contents", m.name));
}

DatasetManifest parse_manifest(const std::string& jsonl, const std::string& name,
                               const std::optional<std::vector<std::string>>& declared_levels) {
  DatasetManifest m;
  m.name = name;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t lineno = 0;
  std::unordered_set<std::string> seen;
  std::size_t with_gold = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Question q = parse_question(line, lineno);
    if (!seen.insert(q.id).second)
      throw DataError(fmt::format("{}: line {}: duplicate id \"{}\"", name, lineno, q.id));
    if (q.gold_answer) ++with_gold;
    m.questions.push_back(std::move(q));
  }
  if (with_gold != 0 && with_gold != m.questions.size())
    throw DataError(fmt::format("{}: mixed gold presence ({} of {} questions carry gold_answer)",
                                name, with_gold, m.questions.size()));
  m.has_gold = !m.questions.empty() && with_gold == m.questions.size();
  if (declared_levels) {
    m.declared_levels = *declared_levels;
  } else {
    std::set<std::string> levels;
    for (const auto& q : m.questions)
      if (q.level) levels.insert(*q.level);
    m.declared_levels.assign(levels.begin(), levels.end());
    std::sort(m.declared_levels.begin(), m.declared_levels.end(), level_less);
  }
  check_manifest(m);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path,
                              const std::optional<std::vector<std::string>>& declared_levels) {
  return parse_manifest(read_file(path), path.stem().string(), declared_levels);
}

std::string serialize_manifest(const DatasetManifest& m) {
  std::string out;
  for (const auto& q : m.questions) {
    json j;
    j["id"] = q.id;
    j["text"] = q.text;
    if (q.gold_answer) j["gold_answer"] = *q.gold_answer;
    if (q.level) j["level"] = *q.level;
    if (!q.source.empty()) j["source"] = q.source;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_manifest(m));
}

DatasetManifest strip_gold(const DatasetManifest& m) {
  DatasetManifest out = m;
  for (auto& q : out.questions) q.gold_answer.reset();
  out.has_gold = false;
  return out;
}

GoldSplit split_gold(const DatasetManifest& manifest, std::uint64_t seed) {
  if (manifest.questions.empty()) throw DataError("split_gold: empty manifest");
  if (!manifest.has_gold)
    throw DataError(fmt::format("split_gold: manifest '{}' carries no gold answers", manifest.name));
  std::vector<std::size_t> order(manifest.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split_gold"));
  seeded_shuffle(order, rng);

  const std::size_t n1 = (manifest.size() + 1) / 2;
  GoldSplit split;
  split.seed = seed;
  split.part1.name = manifest.name + ".gold1";
  split.part2_sealed.name = manifest.name + ".gold2";
  for (auto* part : {&split.part1, &split.part2_sealed}) {
    part->declared_levels = manifest.declared_levels;
    part->has_gold = true;
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n1 ? split.part1 : split.part2_sealed;
    dst.questions.push_back(manifest.questions[order[i]]);
  }
  split.part2_questions = strip_gold(split.part2_sealed);
  split.part2_questions.name = manifest.name + ".questions";
  return split;
}

GoldSplit augment_split(const GoldSplit& split, const DatasetManifest& aux,
                        std::size_t target_each, std::uint64_t seed) {
  const std::size_t n1 = split.part1.size(), n2 = split.part2_sealed.size();
  if (target_each < n1 || target_each < n2)
    throw DataError(fmt::format("augment_split: target {} is below current part sizes {}/{}",
                                target_each, n1, n2));
  const std::size_t need1 = target_each - n1, need2 = target_each - n2;
  if (need1 + need2 == 0) return split;
  if (!aux.has_gold)
    throw DataError(fmt::format("augment_split: aux manifest '{}' carries no gold answers", aux.name));
  if (aux.size() < need1 + need2)
    throw DataError(fmt::format("augment_split: insufficient aux data ({} available, {} needed)",
                                aux.size(), need1 + need2));

  std::unordered_set<std::string> ids;
  for (const auto& q : split.part1.questions) ids.insert(q.id);
  for (const auto& q : split.part2_sealed.questions) ids.insert(q.id);
  for (const auto& q : aux.questions)
    if (ids.count(q.id))
      throw DataError(fmt::format("augment_split: aux id \"{}\" collides with the split", q.id));

  Rng rng(derive_seed(seed, "augment_split"));
  auto draws = sample_without_replacement(aux.size(), need1 + need2, rng);
  GoldSplit out = split;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const Question& q = aux.questions[draws[i]];
    if (i < need1) {
      out.part1.questions.push_back(q);
    } else {
      out.part2_sealed.questions.push_back(q);
    }
  }
  auto merge_levels = [&](DatasetManifest& m) {
    std::set<std::string> levels(m.declared_levels.begin(), m.declared_levels.end());
    for (const auto& l : aux.declared_levels)
      if (levels.insert(l).second) m.declared_levels.push_back(l);
    std::sort(m.declared_levels.begin(), m.declared_levels.end(), level_less);
  };
  merge_levels(out.part1);
  merge_levels(out.part2_sealed);
  std::string name = out.part2_questions.name;
  out.part2_questions = strip_gold(out.part2_sealed);
  out.part2_questions.name = name;
  return out;
}

// ---------------------------------------------------------------------------
// RoundState

void record_artifact(RoundState& state, const std::filesystem::path& base_dir,
                     const std::string& role, const std::string& relative_path) {
  state.dataset_paths[role] = relative_path;
  state.content_digests[relative_path] = sha256_file(base_dir / relative_path);
}

void save_round_state(const RoundState& state, const std::filesystem::path& path) {
  json j;
  j["digest_algo"] = std::string(kDigestAlgo);
  j["round"] = state.round;
  j["dataset_paths"] = state.dataset_paths;
  j["endpoint_ids"] = state.endpoint_ids;
  j["content_digests"] = state.content_digests;
  j["stage_stamps"] = state.stage_stamps;
  write_file_atomic(path, j.dump(2) + "\n");
}

RoundState load_round_state(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw DependencyError(fmt::format("missing run state {}", path.string()));
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("{}: malformed run state ({})", path.string(), e.what()));
  }
  if (j.value("digest_algo", std::string()) != kDigestAlgo)
    throw DataError(fmt::format("{}: unsupported digest_algo '{}'", path.string(),
                                j.value("digest_algo", std::string())));
  RoundState s;
  s.round = j.at("round").get<int>();
  if (s.round < 1) throw DataError(fmt::format("{}: round must be >= 1", path.string()));
  s.dataset_paths = j.value("dataset_paths", std::map<std::string, std::string>{});
  s.endpoint_ids = j.value("endpoint_ids", std::map<std::string, std::string>{});
  s.content_digests = j.value("content_digests", std::map<std::string, std::string>{});
  s.stage_stamps = j.value("stage_stamps", std::map<std::string, std::string>{});
  return s;
}

std::vector<std::string> stale_artifacts(const RoundState& state,
                                         const std::filesystem::path& base_dir) {
  std::vector<std::string> stale;
  for (const auto& [rel, digest] : state.content_digests) {
    auto p = base_dir / rel;
    if (!std::filesystem::exists(p) || sha256_file(p) != digest) stale.push_back(rel);
  }
  return stale;
}

RoundState resume_round_state(const std::filesystem::path& path) {
  RoundState s = load_round_state(path);
  const auto base = path.parent_path();
  for (const auto& [rel, digest] : s.content_digests) {
    auto p = base / rel;
    if (!std::filesystem::exists(p))
      throw DependencyError(fmt::format("missing artifact {}", p.string()));
    if (sha256_file(p) != digest)
      throw DependencyError(fmt::format("digest mismatch for {} (stale artifact)", p.string()));
  }
  return s;
}

}  // namespace w2s
