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

#include "w2s/orchestrator.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "w2s/digest.hpp"
#include "w2s/error.hpp"
#include "w2s/metrics.hpp"
#include "w2s/stage1.hpp"
#include "w2s/stage2.hpp"

namespace w2s {

namespace {

using nlohmann::json;

constexpr const char* kStateFile = "state.json";

constexpr const char* kPart1 = "split.part1";
constexpr const char* kQuestions = "split.questions";
constexpr const char* kSealed = "split.sealed";
constexpr const char* kDemos = "stage1.demos";
constexpr const char* kSamples = "stage2.samples";
constexpr const char* kPairsBuilt = "stage2.pairs_built";
constexpr const char* kSkipsBuilt = "stage2.skips_built";
constexpr const char* kPreference = "stage2.preference";
constexpr const char* kSkipReport = "stage2.skip_report";
constexpr const char* kReportJson = "eval.report";
constexpr const char* kReportTable = "eval.table";

std::string round_dir(int r) { return fmt::format("stage1/r{}", r); }

std::string file_digest_or_empty(const std::filesystem::path& p) {
  return std::filesystem::exists(p) ? sha256_file(p) : std::string();
}

json score_ref_json(const ScoreRef& ref) {
  return std::visit([](const auto& v) { return json(v); }, ref);
}

}  // namespace

// ---------------------------------------------------------------------------
// RunLock

RunLock::RunLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
  std::filesystem::create_directories(dir);
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw DependencyError(fmt::format(
        "output directory {} is locked by another run (remove {} if no run is active)",
        dir.string(), path_.string()));
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(RunConfig config, bool resume, std::ostream& log)
    : config_(std::move(config)), log_(log) {
  if (auto diags = validate(config_); !diags.empty()) throw ValidationError(std::move(diags));
  out_ = config_.out_path();
  lock_.emplace(out_);
  if (!config_.profile.empty()) profile_ = ExtractionProfile::load(config_.resolve(config_.profile));

  const auto state_path = out_ / kStateFile;
  if (std::filesystem::exists(state_path)) {
    state_ = resume ? resume_round_state(state_path) : load_round_state(state_path);
  } else if (resume) {
    throw DependencyError(fmt::format("--resume: no run state at {}", state_path.string()));
  }
}

void Pipeline::note(const std::string& message) {
  summary_.messages.push_back(message);
  log_ << message << "\n";
}

void Pipeline::save_state() { save_round_state(state_, out_ / kStateFile); }

std::filesystem::path Pipeline::require(const std::string& key) const {
  auto it = state_.dataset_paths.find(key);
  if (it == state_.dataset_paths.end())
    throw DependencyError(fmt::format("missing artifact '{}' (run the producing stage first)", key));
  auto p = out_ / it->second;
  if (!std::filesystem::exists(p))
    throw DependencyError(fmt::format("missing artifact '{}' at {}", key, p.string()));
  return p;
}

const RegisteredEndpoint& Pipeline::endpoint(const std::string& role) const {
  const auto* e = config_.endpoint_for(role);
  if (e == nullptr)
    throw DependencyError(fmt::format("no endpoint registered for role '{}'", role));
  return *e;
}

std::string Pipeline::stamp(const std::string& unit, const json& settings,
                            const std::vector<std::string>& input_keys,
                            const std::vector<std::string>& roles) const {
  json j;
  j["unit"] = unit;
  j["settings"] = settings;
  j["profile"] = profile_.to_json_text();
  for (const auto& key : input_keys) {
    const auto p = require(key);
    j["inputs"][key] = sha256_file(p);
  }
  for (const auto& role : roles) {
    const auto& e = endpoint(role).spec;
    json ej;
    ej["id"] = e.id;
    ej["kind"] = e.kind == EndpointKind::Remote ? "remote" : "simulated";
    ej["base_url"] = e.base_url;
    ej["model"] = e.model_name;
    ej["api"] = e.api == WireApi::Chat ? "chat" : "completions";
    if (e.kind == EndpointKind::Simulated) ej["sim"] = file_digest_or_empty(e.sim_config);
    j["endpoints"][role] = ej;
  }
  return sha256_hex(j.dump());
}

bool Pipeline::up_to_date(const std::string& unit, const std::string& stamp_value,
                          const Outputs& outputs) {
  auto it = state_.stage_stamps.find(unit);
  if (it == state_.stage_stamps.end() || it->second != stamp_value) return false;
  for (const auto& [key, rel] : outputs) {
    auto p = state_.dataset_paths.find(key);
    if (p == state_.dataset_paths.end() || p->second != rel) return false;
    auto d = state_.content_digests.find(rel);
    if (d == state_.content_digests.end() || !std::filesystem::exists(out_ / rel) ||
        sha256_file(out_ / rel) != d->second)
      return false;
  }
  summary_.up_to_date.push_back(unit);
  log_ << "[" << unit << "] up-to-date\n";
  return true;
}

void Pipeline::finish(const std::string& unit, const std::string& stamp_value,
                      const Outputs& outputs) {
  for (const auto& [key, rel] : outputs) record_artifact(state_, out_, key, rel);
  state_.stage_stamps[unit] = stamp_value;
  summary_.executed.push_back(unit);
  save_state();
}

void Pipeline::check_failures(const std::string& unit, const GenBatch& batch, std::size_t prompts) {
  if (batch.failures.empty()) return;
  const double rate = batch.failure_rate(prompts);
  log_ << fmt::format("[{}] {} of {} prompts failed ({:.1f}%)\n", unit, batch.failures.size(),
                      prompts, 100.0 * rate);
  if (rate > config_.max_failure_rate) {
    save_state();
    throw EndpointError(fmt::format(
        "[{}] failure rate {:.1f}% exceeds backend.max_failure_rate {:.1f}%; first error: {}", unit,
        100.0 * rate, 100.0 * config_.max_failure_rate, batch.failures.front().error));
  }
}

DatasetManifest Pipeline::curation_questions() const {
  auto m = load_manifest(require(kQuestions));
  if (m.has_gold) throw DataError("curation manifest unexpectedly carries gold answers");
  return m;
}

// ---------------------------------------------------------------------------
// split

void Pipeline::split() {
  const std::string unit = "split";
  const auto train = config_.resolve(config_.data.train);
  if (!std::filesystem::exists(train))
    throw DependencyError(fmt::format("training manifest {} does not exist", train.string()));
  json settings{{"train", sha256_file(train)},
                {"seed", config_.split.seed},
                {"target_each", config_.split.target_each}};
  if (config_.split.target_each > 0) {
    if (config_.data.aux.empty())
      throw ValidationError({"data.aux: required when split.target_each > 0"});
    settings["aux"] = sha256_file(config_.resolve(config_.data.aux));
  }
  const Outputs outputs{{kPart1, "split/part1.jsonl"},
                        {kQuestions, "split/part2_questions.jsonl"},
                        {kSealed, "split/part2_sealed.jsonl"}};
  const auto st = stamp(unit, settings, {}, {});
  if (up_to_date(unit, st, outputs)) return;

  auto manifest = load_manifest(train);
  auto gs = split_gold(manifest, config_.split.seed);
  if (config_.split.target_each > 0) {
    auto aux = load_manifest(config_.resolve(config_.data.aux));
    gs = augment_split(gs, aux, config_.split.target_each, config_.split.seed);
  }
  save_manifest(gs.part1, out_ / outputs.at(kPart1));
  save_manifest(gs.part2_questions, out_ / outputs.at(kQuestions));
  save_manifest(gs.part2_sealed, out_ / outputs.at(kSealed));
  log_ << fmt::format("[split] D_gold,1 = {} questions, Q = {} questions\n", gs.part1.size(),
                      gs.part2_questions.size());
  finish(unit, st, outputs);
  note(fmt::format("train the weak model on {} and register it as role 'weak'",
                   (out_ / outputs.at(kPart1)).string()));
}

// ---------------------------------------------------------------------------
// stage1

int Pipeline::next_round() const {
  for (int r = 1; r <= config_.stage1.rounds; ++r)
    if (!state_.dataset_paths.count(round_key(r, "sft.hybrid_ft"))) return r;
  return config_.stage1.rounds + 1;
}

void Pipeline::stage1_gen_weak(int r) {
  const std::string unit = round_key(r, "gen-weak");
  const std::string role = r == 1 ? std::string("weak") : model_role("weak_ft", r - 1);
  const PromptStyle style = r == 1 ? config_.stage1.weak_prompt : PromptStyle::ZeroShotCot;
  endpoint(role);
  const Outputs outputs{{round_key(r, "weak"), round_dir(r) + "/weak.jsonl"}};
  json settings{{"style", to_string(style)}, {"max_tokens", config_.stage1.max_tokens}};
  const auto st = stamp(unit, settings, {kQuestions}, {role});
  if (up_to_date(unit, st, outputs)) return;

  const auto questions = curation_questions();
  const auto& ep = endpoint(role);
  auto backend = make_backend(ep.spec);
  SamplingConfig cfg = SamplingConfig::greedy();
  cfg.max_tokens = config_.stage1.max_tokens;
  auto batch = produce_weak_data(*backend, ep.spec, questions, profile_, style, cfg);
  state_.endpoint_ids[role] = ep.spec.id;
  check_failures(unit, batch, questions.size());
  save_batch(batch, out_ / outputs.begin()->second);
  log_ << fmt::format("[{}] {} responses from '{}'\n", unit, batch.responses.size(), ep.spec.id);
  finish(unit, st, outputs);
}

void Pipeline::stage1_gen_icl(int r) {
  const std::string unit = round_key(r, "gen-icl");
  const std::string role = r == 1 ? std::string("strong_base") : model_role("icl_ft", r - 1);
  endpoint(role);
  Outputs outputs{{round_key(r, "icl"), round_dir(r) + "/icl.jsonl"}};
  std::vector<std::string> inputs{kQuestions};
  json settings{{"max_tokens", config_.stage1.max_tokens}};
  if (r == 1) {
    outputs.emplace(kDemos, "stage1/demos.jsonl");
    settings["k"] = config_.stage1.demo_count;
    if (!config_.stage1.demo_file.empty()) {
      settings["demo_file"] = sha256_file(config_.resolve(config_.stage1.demo_file));
    } else {
      settings["demo_seed"] = config_.stage1.demo_seed;
      inputs.push_back(round_key(1, "weak"));
    }
  } else {
    settings["style"] = to_string(PromptStyle::ZeroShotCot);
  }
  const auto st = stamp(unit, settings, inputs, {role});
  if (up_to_date(unit, st, outputs)) return;

  const auto questions = curation_questions();
  const auto& ep = endpoint(role);
  auto backend = make_backend(ep.spec);
  SamplingConfig cfg = SamplingConfig::greedy();
  cfg.max_tokens = config_.stage1.max_tokens;
  GenBatch batch;
  if (r == 1) {
    std::vector<Demonstration> demos;
    if (!config_.stage1.demo_file.empty()) {
      demos = load_demonstrations(config_.resolve(config_.stage1.demo_file));
    } else {
      auto weak = load_batch(require(round_key(1, "weak")), profile_);
      demos = select_demonstrations(weak, questions, config_.stage1.demo_count,
                                    config_.stage1.demo_seed);
    }
    save_demonstrations(demos, out_ / outputs.at(kDemos));
    batch = produce_icl_data(*backend, ep.spec, questions, demos, config_.stage1.demo_count,
                             profile_, cfg);
  } else {
    batch = produce_weak_data(*backend, ep.spec, questions, profile_, PromptStyle::ZeroShotCot, cfg);
  }
  state_.endpoint_ids[role] = ep.spec.id;
  check_failures(unit, batch, questions.size());
  save_batch(batch, out_ / outputs.at(round_key(r, "icl")));
  log_ << fmt::format("[{}] {} responses from '{}'\n", unit, batch.responses.size(), ep.spec.id);
  finish(unit, st, outputs);
}

void Pipeline::stage1_select(int r) {
  const std::string unit = round_key(r, "select");
  const Outputs outputs{{round_key(r, "selection"), round_dir(r) + "/selection.json"}};
  json settings{{"augment_target", config_.stage1.augment_target},
                {"augment_seed", config_.stage1.augment_seed}};
  const auto st = stamp(unit, settings, {round_key(r, "weak"), round_key(r, "icl")}, {});
  if (up_to_date(unit, st, outputs)) return;

  auto weak = load_batch(require(round_key(r, "weak")), profile_);
  auto icl = load_batch(require(round_key(r, "icl")), profile_);
  auto sel = consistency_select(weak, icl);
  const std::size_t consistent = sel.selected.size();
  if (config_.stage1.augment_target > 0)
    sel = augment_selection(sel, config_.stage1.augment_target,
                            derive_seed(config_.stage1.augment_seed, "round", static_cast<std::uint64_t>(r)));
  write_file_atomic(out_ / outputs.begin()->second, serialize_selection(sel));
  log_ << fmt::format("[{}] {} consistent, {} augmented, {} inconsistent, {} excluded{}\n", unit,
                      consistent, sel.augmented.size(), sel.pool.size(), sel.excluded.size(),
                      sel.shortfall ? fmt::format(", augmentation shortfall {}", sel.shortfall)
                                    : std::string());
  finish(unit, st, outputs);
}

void Pipeline::stage1_emit(int r) {
  const std::string unit = round_key(r, "emit");
  Outputs outputs;
  std::vector<SftVariant> variants{SftVariant::WeakFt, SftVariant::IclFt, SftVariant::HybridFt};
  if (r == 1) variants.insert(variants.begin(), SftVariant::FullWeak);
  for (auto v : variants)
    outputs.emplace(round_key(r, "sft." + std::string(to_string(v))),
                    fmt::format("{}/sft_{}.jsonl", round_dir(r), to_string(v)));
  const auto st = stamp(unit, json::object(),
                        {kQuestions, round_key(r, "weak"), round_key(r, "icl"), round_key(r, "selection")},
                        {});
  if (!up_to_date(unit, st, outputs)) {
    const auto questions = curation_questions();
    auto weak = load_batch(require(round_key(r, "weak")), profile_);
    auto icl = load_batch(require(round_key(r, "icl")), profile_);
    auto sel = parse_selection(read_file(require(round_key(r, "selection"))), weak, icl);
    for (auto v : variants) {
      auto ds = build_sft_dataset(v, r, questions, weak, sel);
      emit_sft_dataset(ds, out_ / outputs.at(round_key(r, "sft." + std::string(to_string(v)))));
      log_ << fmt::format("[{}] {}: {} records\n", unit, to_string(v), ds.records.size());
    }
    state_.round = std::max(state_.round, r);
    finish(unit, st, outputs);
  }
  state_.round = std::max(state_.round, r);
  for (const char* v : {"weak_ft", "icl_ft", "hybrid_ft"}) {
    note(fmt::format("fine-tune on {} and register the result as role '{}'",
                     (out_ / outputs.at(round_key(r, std::string("sft.") + v))).string(),
                     model_role(v, r)));
  }
}

RoundPlan Pipeline::stage1_plan(int r) {
  RoundState s = state_;
  s.round = r;
  return plan_next_round(s, config_.stage1.rounds, config_.registered_roles());
}

void Pipeline::stage1() {
  for (int r = 1; r <= config_.stage1.rounds; ++r) {
    if (r > 1) {
      RoundPlan plan;
      try {
        plan = stage1_plan(r - 1);
      } catch (const DependencyError& e) {
        note(fmt::format("stage1 paused before round {}: {}", r, e.what()));
        save_state();
        return;
      }
    }
    stage1_gen_weak(r);
    stage1_gen_icl(r);
    stage1_select(r);
    stage1_emit(r);
  }
  auto plan = stage1_plan(config_.stage1.rounds);
  for (const auto& s : plan.steps) note(s);
  summary_.stage1_complete = true;
  save_state();
}

// ---------------------------------------------------------------------------
// stage2

void Pipeline::stage2_sample() {
  const std::string unit = "stage2.sample";
  const std::string final_key = round_key(config_.stage1.rounds, "sft.hybrid_ft");
  if (!state_.dataset_paths.count(final_key))
    throw DependencyError(fmt::format(
        "stage2 requires the final stage1 emission: missing artifact '{}'", final_key));
  endpoint("m_plus");
  const Outputs outputs{{kSamples, "stage2/samples.jsonl"}};
  json settings{{"n", config_.stage2.n}, {"temperature", config_.stage2.temperature}};
  const auto st = stamp(unit, settings, {kQuestions, final_key}, {"m_plus"});
  if (up_to_date(unit, st, outputs)) return;

  const auto questions = curation_questions();
  const auto& ep = endpoint("m_plus");
  auto backend = make_backend(ep.spec);
  auto batch = sample_for_confidence(*backend, ep.spec, questions, config_.stage2.n,
                                     config_.stage2.temperature, profile_);
  state_.endpoint_ids["m_plus"] = ep.spec.id;
  check_failures(unit, batch, questions.size());
  save_batch(batch, out_ / outputs.begin()->second);
  log_ << fmt::format("[{}] {} samples from '{}'\n", unit, batch.responses.size(), ep.spec.id);
  finish(unit, st, outputs);
}

void Pipeline::stage2_build() {
  const std::string unit = "stage2.build";
  const Outputs outputs{{kPairsBuilt, "stage2/pairs_built.jsonl"},
                        {kSkipsBuilt, "stage2/skips_built.json"}};
  json settings{{"n", config_.stage2.n},
                {"tau", config_.stage2.tau},
                {"recipe", to_string(config_.stage2.recipe)},
                {"seed", config_.stage2.seed}};
  const auto st = stamp(unit, settings, {kQuestions, kSamples, round_key(1, "weak")}, {});
  if (up_to_date(unit, st, outputs)) return;

  const auto questions = curation_questions();
  auto samples = load_batch(require(kSamples), profile_);
  auto weak = load_batch(require(round_key(1, "weak")), profile_);
  auto result = build_preference_pairs(questions, samples, weak, config_.stage2.n,
                                       config_.stage2.tau, config_.stage2.recipe, config_.stage2.seed);
  json skips = json::object();
  for (const auto& [reason, ids] : result.skipped) skips[std::string(to_string(reason))] = ids;
  write_file_atomic(out_ / outputs.at(kPairsBuilt), serialize_preference_pairs(result.pairs));
  write_file_atomic(out_ / outputs.at(kSkipsBuilt), skips.dump(1) + "\n");
  log_ << fmt::format("[{}] {} pairs from {} questions\n", unit, result.pairs.size(), questions.size());
  finish(unit, st, outputs);
}

void Pipeline::stage2_emit() {
  const std::string unit = "stage2.emit";
  const Outputs outputs{{kPreference, "stage2/preference.jsonl"},
                        {kSkipReport, "stage2/skip_report.json"}};
  json settings{{"tau", config_.stage2.tau}, {"recipe", to_string(config_.stage2.recipe)}};
  const auto st = stamp(unit, settings, {kPairsBuilt, kSkipsBuilt}, {});
  if (!up_to_date(unit, st, outputs)) {
    PairBuildResult result;
    result.pairs = load_preference_pairs(require(kPairsBuilt));
    auto skips = json::parse(read_file(require(kSkipsBuilt)));
    for (auto reason : {SkipReason::Unconfident, SkipReason::EmptyMinus, SkipReason::WeakMissing,
                        SkipReason::SamplingFailed}) {
      const std::string name(to_string(reason));
      if (skips.contains(name)) result.skipped[reason] = skips[name].get<std::vector<std::string>>();
    }
    auto problems =
        validate_preference_pairs(result.pairs, profile_, config_.stage2.tau, config_.stage2.recipe);
    if (!problems.empty())
      throw DataError(fmt::format("preference pairs failed validation ({} problems), first: {}",
                                  problems.size(), problems.front()));
    emit_preference_dataset(result, out_ / outputs.at(kPreference), out_ / outputs.at(kSkipReport));
    log_ << fmt::format("[{}] {} validated pairs\n", unit, result.pairs.size());
    finish(unit, st, outputs);
  }
  note(fmt::format("preference-optimize m_plus on {} and register the result as role 'm_pro'",
                   (out_ / outputs.at(kPreference)).string()));
}

void Pipeline::stage2() {
  stage2_sample();
  stage2_build();
  stage2_emit();
}

// ---------------------------------------------------------------------------
// eval

void Pipeline::eval() {
  const std::string unit = "eval";
  if (config_.eval.roles.empty()) throw ValidationError({"eval.roles: no roles to evaluate"});
  const auto test_path = config_.resolve(config_.data.test);
  if (!std::filesystem::exists(test_path))
    throw DependencyError(fmt::format("test manifest {} does not exist", test_path.string()));
  for (const auto& role : config_.eval.roles) endpoint(role);

  std::vector<std::string> inputs;
  if (config_.eval.diversity) inputs.push_back(kQuestions);
  if (!config_.eval.judge_role.empty()) {
    endpoint(config_.eval.judge_role);
    inputs.push_back(round_key(1, "sft.weak_ft"));
    inputs.push_back(round_key(1, "sft.icl_ft"));
  }
  std::vector<std::string> roles = config_.eval.roles;
  if (!config_.eval.judge_role.empty()) roles.push_back(config_.eval.judge_role);

  json settings = config_.raw.contains("eval") ? config_.raw["eval"] : json::object();
  settings["test"] = sha256_file(test_path);
  settings["seed"] = config_.seed;

  Outputs outputs{{kReportJson, "eval/report.json"}, {kReportTable, "eval/report.txt"}};
  for (const auto& role : config_.eval.roles) {
    outputs.emplace("eval." + role + ".greedy", "eval/" + role + "/greedy.jsonl");
    if (config_.eval.pass_at_k)
      outputs.emplace("eval." + role + ".samples", "eval/" + role + "/samples.jsonl");
    if (config_.eval.diversity)
      outputs.emplace("eval." + role + ".diversity", "eval/" + role + "/diversity.csv");
  }
  const auto st = stamp(unit, settings, inputs, roles);
  if (up_to_date(unit, st, outputs)) return;

  const auto test = load_manifest(test_path);
  const auto gold = gold_keys(test, profile_);
  std::vector<EvalReport> reports;
  std::map<std::string, double> accuracy_by_role;

  for (const auto& role : config_.eval.roles) {
    const auto& ep = endpoint(role);
    auto backend = make_backend(ep.spec);
    EvalReport rep;
    rep.role = role;
    rep.endpoint_id = ep.spec.id;
    rep.dataset = test.name;
    rep.questions = test.size();

    auto greedy = greedy_accuracy(*backend, ep.spec, test, profile_,
                                  config_.eval.prompt == PromptStyle::ZeroShotCot);
    save_batch(greedy.batch, out_ / outputs.at("eval." + role + ".greedy"));
    rep.greedy_accuracy = greedy.accuracy;
    rep.failures = greedy.batch.failures.size();
    if (!test.declared_levels.empty()) rep.per_level = accuracy_by_level(greedy.results, test);

    if (config_.eval.pass_at_k) {
      auto samples = generate(*backend, ep.spec,
                              zero_shot_requests(strip_gold(test), config_.eval.prompt),
                              SamplingConfig::sampled(config_.eval.k, config_.eval.pass_temperature),
                              profile_);
      save_batch(samples, out_ / outputs.at("eval." + role + ".samples"));
      rep.failures += samples.failures.size();
      // Questions with failed samples are scored on what came back, padded
      // with unparseable keys so every question has exactly k samples.
      auto grouped = group_answers(samples);
      for (const auto& [id, key] : gold) grouped[id].resize(static_cast<std::size_t>(config_.eval.k));
      rep.pass_at_k = std::make_pair(config_.eval.k, pass_at_k(grouped, gold, config_.eval.k));
    }

    if (config_.eval.diversity) {
      auto questions = curation_questions();
      if (config_.eval.diversity_max_questions > 0 &&
          questions.questions.size() > config_.eval.diversity_max_questions)
        questions.questions.resize(config_.eval.diversity_max_questions);
      auto samples = generate(*backend, ep.spec, zero_shot_requests(questions, PromptStyle::ZeroShotCot),
                              SamplingConfig::sampled(config_.eval.diversity_n, 1.0), profile_);
      std::map<std::string, std::vector<std::string>> texts;
      for (const auto& r : samples.responses) texts[r.question_id].push_back(r.text);
      for (auto it = texts.begin(); it != texts.end();) {
        if (it->second.size() != static_cast<std::size_t>(config_.eval.diversity_n)) {
          it = texts.erase(it);
        } else {
          ++it;
        }
      }
      auto hist = diversity_histogram(texts, config_.eval.diversity_threshold);
      hist.max_n = static_cast<std::size_t>(config_.eval.diversity_n);
      write_file_atomic(out_ / outputs.at("eval." + role + ".diversity"), hist.to_csv());
    }
    accuracy_by_role[role] = rep.greedy_accuracy;
    log_ << fmt::format("[eval] {} ({}): greedy {:.2f}%\n", role, ep.spec.id, rep.greedy_accuracy);
    reports.push_back(std::move(rep));
  }

  auto resolve_score = [&](const ScoreRef& ref, const std::string& what) -> double {
    if (const double* v = std::get_if<double>(&ref)) return *v;
    const auto& role = std::get<std::string>(ref);
    auto it = accuracy_by_role.find(role);
    if (it == accuracy_by_role.end())
      throw DependencyError(fmt::format("{} refers to role '{}' which is not in eval.roles", what, role));
    return it->second;
  };
  for (auto& rep : reports)
    for (const auto& [name, ref] : config_.eval.baselines)
      rep.baselines[name] = resolve_score(ref, "eval.baselines." + name);

  std::optional<double> pgr_value;
  if (config_.eval.pgr_floor) {
    pgr_value = pgr(resolve_score(*config_.eval.pgr_floor, "eval.pgr.floor"),
                    resolve_score(*config_.eval.pgr_w2s, "eval.pgr.weak_to_strong"),
                    resolve_score(*config_.eval.pgr_ceiling, "eval.pgr.ceiling"));
  }

  auto report_json = json::parse(report_to_json(reports, pgr_value));
  std::string table = report_deltas(reports);
  if (pgr_value) table += fmt::format("PGR: {:.2f}%\n", *pgr_value);

  if (!config_.eval.judge_role.empty()) {
    const auto& judge = endpoint(config_.eval.judge_role);
    auto backend = make_backend(judge.spec);
    for (const char* variant : {"weak_ft", "icl_ft"}) {
      auto records = load_sft_records(require(round_key(1, std::string("sft.") + variant)));
      std::vector<std::pair<std::string, std::string>> items;
      std::vector<std::string> ids;
      for (const auto& r : records) {
        items.emplace_back(r.question, r.response);
        ids.push_back(r.id);
      }
      auto s = process_eval(*backend, judge.spec, items, ids, config_.eval.judge_max_items,
                            config_.seed);
      report_json["process_level"][variant] = {{"judged", s.judged},
                                               {"correct", s.correct},
                                               {"parse_failures", s.parse_failures},
                                               {"endpoint_failures", s.endpoint_failures},
                                               {"percent", std::round(s.percent * 100.0) / 100.0}};
      table += fmt::format("process-level {}: {:.2f}% of {} judged ({} parse failures)\n", variant,
                           s.percent, s.judged, s.parse_failures);
    }
  }

  write_file_atomic(out_ / outputs.at(kReportJson), report_json.dump(2) + "\n");
  write_file_atomic(out_ / outputs.at(kReportTable), table);
  log_ << table;
  finish(unit, st, outputs);
}

std::string Pipeline::report() const { return read_file(require(kReportTable)); }

}  // namespace w2s
