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

#include "w2s/config.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "w2s/digest.hpp"
#include "w2s/error.hpp"

namespace w2s {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> diagnostics)
    : std::runtime_error(join_lines(diagnostics)), diagnostics_(std::move(diagnostics)) {}

namespace {

using nlohmann::json;

// Reads doc[key] into `out` if present; records a diagnostic on type errors.
template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& path,
          std::vector<std::string>& diags) {
  if (!obj.is_object() || !obj.contains(key) || obj[key].is_null()) return;
  try {
    out = obj[key].get<T>();
  } catch (const json::exception&) {
    diags.push_back(fmt::format("{}.{}: unexpected type ({})", path, key, obj[key].type_name()));
  }
}

template <typename Enum, typename Parse>
void read_enum(const json& obj, const char* key, Enum& out, Parse parse, const std::string& path,
               std::vector<std::string>& diags) {
  std::string s;
  if (!obj.is_object() || !obj.contains(key)) return;
  read(obj, key, s, path, diags);
  try {
    out = parse(s);
  } catch (const std::exception& e) {
    diags.push_back(fmt::format("{}.{}: {}", path, key, e.what()));
  }
}

std::optional<ScoreRef> read_score(const json& obj, const char* key, const std::string& path,
                                   std::vector<std::string>& diags) {
  if (!obj.is_object() || !obj.contains(key) || obj[key].is_null()) return std::nullopt;
  const auto& v = obj[key];
  if (v.is_number()) return ScoreRef{v.get<double>()};
  if (v.is_string()) return ScoreRef{v.get<std::string>()};
  diags.push_back(fmt::format("{}.{}: expected a number or an endpoint role", path, key));
  return std::nullopt;
}

const json& section(const json& doc, const char* key) {
  static const json empty = json::object();
  return doc.contains(key) && doc[key].is_object() ? doc[key] : empty;
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

const RegisteredEndpoint* RunConfig::endpoint_for(const std::string& role) const {
  for (const auto& e : endpoints)
    if (std::find(e.roles.begin(), e.roles.end(), role) != e.roles.end()) return &e;
  return nullptr;
}

std::vector<std::string> RunConfig::registered_roles() const {
  std::vector<std::string> out;
  for (const auto& e : endpoints) out.insert(out.end(), e.roles.begin(), e.roles.end());
  return out;
}

void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError({fmt::format("--stage-overrides: expected KEY=VALUE, got '{}'", assignment)});
  const std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    auto dot = key.find('.', start);
    std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError({fmt::format("--stage-overrides: bad key '{}'", key)});
    json* child = nullptr;
    if (node->is_array()) {
      // Numeric segments index into arrays ("endpoints.0.max_in_flight").
      std::size_t idx = 0;
      auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), idx);
      if (ec != std::errc() || end != part.data() + part.size() || idx >= node->size())
        throw ValidationError({fmt::format("--stage-overrides: '{}' is not an index of '{}'", part, key)});
      child = &(*node)[idx];
    } else {
      if (!node->is_object()) *node = json::object();
      child = &(*node)[part];
    }
    if (dot == std::string::npos) {
      *child = parsed;
      return;
    }
    node = child;
    start = dot + 1;
  }
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  std::vector<std::string> d;
  if (!doc.is_object()) throw ValidationError({"config: expected a JSON object"});
  RunConfig c;
  c.base_dir = base_dir;
  c.raw = doc;
  read(doc, "version", c.version, "config", d);
  read(doc, "output_dir", c.output_dir, "config", d);
  read(doc, "seed", c.seed, "config", d);
  read(doc, "profile", c.profile, "config", d);

  const auto& data = section(doc, "data");
  read(data, "train", c.data.train, "data", d);
  read(data, "aux", c.data.aux, "data", d);
  read(data, "test", c.data.test, "data", d);

  const auto& split = section(doc, "split");
  c.split.seed = c.seed;
  read(split, "seed", c.split.seed, "split", d);
  read(split, "target_each", c.split.target_each, "split", d);

  read(section(doc, "backend"), "max_failure_rate", c.max_failure_rate, "backend", d);

  if (doc.contains("endpoints")) {
    if (!doc["endpoints"].is_array()) {
      d.push_back("endpoints: expected an array");
    } else {
      for (std::size_t i = 0; i < doc["endpoints"].size(); ++i) {
        const auto& e = doc["endpoints"][i];
        const std::string path = fmt::format("endpoints[{}]", i);
        RegisteredEndpoint reg;
        auto& s = reg.spec;
        read(e, "id", s.id, path, d);
        std::string kind = "simulated";
        read(e, "kind", kind, path, d);
        if (kind == "remote") {
          s.kind = EndpointKind::Remote;
        } else if (kind == "simulated") {
          s.kind = EndpointKind::Simulated;
        } else {
          d.push_back(fmt::format("{}.kind: expected 'remote' or 'simulated', got '{}'", path, kind));
        }
        read(e, "base_url", s.base_url, path, d);
        read(e, "sim_config", s.sim_config, path, d);
        if (!s.sim_config.empty()) s.sim_config = c.resolve(s.sim_config).string();
        read(e, "model", s.model_name, path, d);
        std::string api = "completions";
        read(e, "api", api, path, d);
        if (api == "chat") {
          s.api = WireApi::Chat;
        } else if (api != "completions") {
          d.push_back(fmt::format("{}.api: expected 'completions' or 'chat', got '{}'", path, api));
        }
        read(e, "auth_env", s.auth_env, path, d);
        read(e, "request_timeout", s.request_timeout, path, d);
        read(e, "max_in_flight", s.max_in_flight, path, d);
        if (e.contains("retry")) {
          read(e["retry"], "attempts", s.retry.attempts, path + ".retry", d);
          read(e["retry"], "backoff", s.retry.backoff_seconds, path + ".retry", d);
        }
        if (e.contains("role")) {
          std::string role;
          read(e, "role", role, path, d);
          reg.roles.push_back(role);
        }
        if (e.contains("roles")) {
          std::vector<std::string> roles;
          read(e, "roles", roles, path, d);
          reg.roles.insert(reg.roles.end(), roles.begin(), roles.end());
        }
        c.endpoints.push_back(std::move(reg));
      }
    }
  }

  const auto& s1 = section(doc, "stage1");
  c.stage1.demo_seed = c.seed;
  c.stage1.augment_seed = c.seed;
  read(s1, "demo_count", c.stage1.demo_count, "stage1", d);
  read(s1, "demo_seed", c.stage1.demo_seed, "stage1", d);
  read(s1, "demo_file", c.stage1.demo_file, "stage1", d);
  read(s1, "rounds", c.stage1.rounds, "stage1", d);
  read(s1, "augment_target", c.stage1.augment_target, "stage1", d);
  read(s1, "augment_seed", c.stage1.augment_seed, "stage1", d);
  read(s1, "max_tokens", c.stage1.max_tokens, "stage1", d);
  read_enum(s1, "weak_prompt", c.stage1.weak_prompt, parse_prompt_style, "stage1", d);

  const auto& s2 = section(doc, "stage2");
  c.stage2.seed = c.seed;
  read(s2, "n", c.stage2.n, "stage2", d);
  read(s2, "tau", c.stage2.tau, "stage2", d);
  read(s2, "temperature", c.stage2.temperature, "stage2", d);
  read(s2, "seed", c.stage2.seed, "stage2", d);
  read_enum(s2, "recipe", c.stage2.recipe, parse_pair_recipe, "stage2", d);

  const auto& ev = section(doc, "eval");
  read(ev, "roles", c.eval.roles, "eval", d);
  read_enum(ev, "prompt", c.eval.prompt, parse_prompt_style, "eval", d);
  read(ev, "k", c.eval.k, "eval", d);
  read(ev, "pass_at_k", c.eval.pass_at_k, "eval", d);
  read(ev, "pass_temperature", c.eval.pass_temperature, "eval", d);
  if (ev.contains("baselines")) {
    if (!ev["baselines"].is_object()) {
      d.push_back("eval.baselines: expected an object");
    } else {
      for (const auto& [name, v] : ev["baselines"].items()) {
        if (auto ref = read_score(ev["baselines"], name.c_str(), "eval.baselines", d))
          c.eval.baselines.emplace(name, *ref);
      }
    }
  }
  read(ev, "diversity", c.eval.diversity, "eval", d);
  read(ev, "diversity_n", c.eval.diversity_n, "eval", d);
  read(ev, "diversity_max_questions", c.eval.diversity_max_questions, "eval", d);
  read(ev, "diversity_threshold", c.eval.diversity_threshold, "eval", d);
  const auto& pg = section(ev, "pgr");
  c.eval.pgr_floor = read_score(pg, "floor", "eval.pgr", d);
  c.eval.pgr_w2s = read_score(pg, "weak_to_strong", "eval.pgr", d);
  c.eval.pgr_ceiling = read_score(pg, "ceiling", "eval.pgr", d);
  read(ev, "judge_role", c.eval.judge_role, "eval", d);
  read(ev, "judge_max_items", c.eval.judge_max_items, "eval", d);

  if (!d.empty()) throw ValidationError(std::move(d));
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError({fmt::format("{}: malformed JSON ({})", path.string(), e.what())});
  }
  for (const auto& o : overrides) apply_override(doc, o);
  auto dir = std::filesystem::absolute(path).parent_path();
  return parse_config(doc, dir);
}

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> d;
  if (c.version != kConfigVersion)
    d.push_back(fmt::format("version: expected {}, got {}", kConfigVersion, c.version));
  if (c.output_dir.empty()) d.push_back("output_dir: must not be empty");
  if (c.data.train.empty()) d.push_back("data.train: required");
  if (!(c.max_failure_rate >= 0.0 && c.max_failure_rate <= 1.0))
    d.push_back("backend.max_failure_rate: must lie in [0, 1]");

  std::set<std::string> ids;
  std::map<std::string, int> role_claims;
  for (std::size_t i = 0; i < c.endpoints.size(); ++i) {
    const auto& e = c.endpoints[i];
    const std::string path = fmt::format("endpoints[{}]", i);
    auto ed = validate_endpoint(e.spec, path);
    d.insert(d.end(), ed.begin(), ed.end());
    if (!e.spec.id.empty() && !ids.insert(e.spec.id).second)
      d.push_back(fmt::format("{}.id: duplicate endpoint id '{}'", path, e.spec.id));
    if (e.roles.empty()) d.push_back(fmt::format("{}.roles: at least one role required", path));
    for (const auto& r : e.roles) ++role_claims[r];
  }
  for (const auto& [role, claims] : role_claims)
    if (claims > 1)
      d.push_back(fmt::format("endpoints: role '{}' is claimed by {} endpoints", role, claims));
  for (const char* required : {"weak", "strong_base"})
    if (!role_claims.count(required))
      d.push_back(fmt::format("endpoints: no endpoint registered for role '{}'", required));

  if (c.stage1.rounds < 1) d.push_back("stage1.rounds: must be >= 1");
  if (c.stage1.max_tokens < 1) d.push_back("stage1.max_tokens: must be >= 1");

  if (!(c.stage2.tau > 0.0 && c.stage2.tau <= 1.0)) d.push_back("stage2.tau: must lie in (0, 1]");
  if (c.stage2.n < 2) d.push_back("stage2.n: must be >= 2");
  if (c.stage2.temperature < 0.0) d.push_back("stage2.temperature: must be >= 0");
  if (c.stage2.temperature == 0.0 && c.stage2.n != 1)
    d.push_back("stage2.temperature: greedy decoding (temperature 0) implies n = 1");

  if (c.eval.k < 1) d.push_back("eval.k: must be >= 1");
  if (c.eval.k > c.stage2.n) d.push_back("eval.k: must not exceed stage2.n");
  if (c.eval.pass_at_k && c.eval.pass_temperature <= 0.0 && c.eval.k > 1)
    d.push_back("eval.pass_temperature: sampling k > 1 responses needs temperature > 0");
  if (!(c.eval.diversity_threshold > 0.0 && c.eval.diversity_threshold <= 1.0))
    d.push_back("eval.diversity_threshold: must lie in (0, 1]");
  if (c.eval.diversity_n < 1) d.push_back("eval.diversity_n: must be >= 1");
  if (!c.eval.roles.empty() && c.data.test.empty())
    d.push_back("data.test: required when eval.roles is set");
  const bool any_pgr = c.eval.pgr_floor || c.eval.pgr_w2s || c.eval.pgr_ceiling;
  const bool all_pgr = c.eval.pgr_floor && c.eval.pgr_w2s && c.eval.pgr_ceiling;
  if (any_pgr && !all_pgr)
    d.push_back("eval.pgr: floor, weak_to_strong and ceiling must be given together");
  return d;
}

}  // namespace w2s
