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

#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "w2s/error.hpp"
#include "w2s/orchestrator.hpp"
#include "w2s/synth.hpp"

namespace w2s {

namespace {

struct CommonOptions {
  std::string config = "config.json";
  std::vector<std::string> overrides;
  bool resume = false;
};

void print_plan(const RoundPlan& plan, std::ostream& out) {
  if (plan.stop) {
    out << "rounds budget reached\n";
  } else {
    out << fmt::format("round {}:\n", plan.next_round);
    for (const auto& job : plan.jobs)
      out << fmt::format("  generate {} from role '{}' ({})\n", job.output_key, job.source_role,
                         to_string(job.style));
  }
  for (const auto& s : plan.steps) out << "  " << s << "\n";
}

bool has_roles(const RunConfig& c, const std::vector<std::string>& roles) {
  for (const auto& r : roles)
    if (c.endpoint_for(r) == nullptr) return false;
  return true;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"w2s: weak-to-strong reasoning data curation"};
  app.require_subcommand(1);
  app.fallthrough();
  CommonOptions common;
  app.add_option("-c,--config", common.config, "run configuration (JSON)");
  app.add_option("--stage-overrides", common.overrides, "KEY=VALUE config overrides (repeatable)")
      ->take_all();
  app.add_flag("--resume", common.resume, "verify recorded artifacts before continuing");

  auto* validate_cmd = app.add_subcommand("validate", "check the configuration and exit");
  auto* split_cmd = app.add_subcommand("split", "split the gold-labelled training data");

  auto* s1 = app.add_subcommand("stage1", "final answer consistency curation");
  s1->require_subcommand(0, 1);
  std::optional<int> round;
  s1->add_option("--round", round, "round to run (default: next incomplete)");
  auto* s1_weak = s1->add_subcommand("gen-weak", "generate D_weak");
  auto* s1_icl = s1->add_subcommand("gen-icl", "generate D_icl");
  auto* s1_select = s1->add_subcommand("select", "consistency selection");
  auto* s1_emit = s1->add_subcommand("emit", "write the SFT datasets");
  auto* s1_plan = s1->add_subcommand("plan-round", "show the plan for the next round");
  for (auto* sub : {s1_weak, s1_icl, s1_select, s1_emit, s1_plan}) sub->fallthrough();

  auto* s2 = app.add_subcommand("stage2", "preference pair construction");
  s2->require_subcommand(0, 1);
  std::optional<int> n;
  std::optional<double> tau;
  std::optional<std::string> recipe;
  s2->add_option("--n", n, "samples per question");
  s2->add_option("--tau", tau, "confidence threshold");
  s2->add_option("--recipe", recipe, "weak_in_pair or self_generated");
  auto* s2_sample = s2->add_subcommand("sample", "draw samples from m_plus");
  auto* s2_build = s2->add_subcommand("build", "build preference pairs");
  auto* s2_emit = s2->add_subcommand("emit", "validate and write the preference dataset");
  for (auto* sub : {s2_sample, s2_build, s2_emit}) sub->fallthrough();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate registered roles on the test set");
  auto* report_cmd = app.add_subcommand("report", "print the last evaluation report");
  auto* run_cmd = app.add_subcommand("run", "run every stage whose endpoints are registered");

  auto* synth_cmd = app.add_subcommand("synth", "write a simulated demo bundle");
  std::string synth_dir;
  SynthOptions synth;
  synth_cmd->add_option("--out", synth_dir, "bundle directory")->required();
  synth_cmd->add_option("--train", synth.train, "training questions");
  synth_cmd->add_option("--aux", synth.aux, "auxiliary questions");
  synth_cmd->add_option("--test", synth.test, "test questions");
  synth_cmd->add_option("--seed", synth.seed, "seed");
  synth_cmd->add_option("--rounds", synth.rounds, "stage1 rounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Validation);
  }

  try {
    if (synth_cmd->parsed()) {
      out << write_synthetic_bundle(synth_dir, synth).string() << "\n";
      return 0;
    }
    if (n) common.overrides.push_back(fmt::format("stage2.n={}", *n));
    if (tau) common.overrides.push_back(fmt::format("stage2.tau={}", *tau));
    if (recipe) common.overrides.push_back(fmt::format("stage2.recipe=\"{}\"", *recipe));

    auto config = load_config(common.config, common.overrides);
    if (auto diags = validate(config); !diags.empty()) throw ValidationError(std::move(diags));
    if (validate_cmd->parsed()) {
      out << "configuration is valid\n";
      return 0;
    }

    Pipeline p(config, common.resume, out);
    if (split_cmd->parsed()) {
      p.split();
    } else if (s1->parsed()) {
      const int r = round.value_or(std::min(p.next_round(), config.stage1.rounds));
      if (s1_weak->parsed()) {
        p.stage1_gen_weak(r);
      } else if (s1_icl->parsed()) {
        p.stage1_gen_icl(r);
      } else if (s1_select->parsed()) {
        p.stage1_select(r);
      } else if (s1_emit->parsed()) {
        p.stage1_emit(r);
      } else if (s1_plan->parsed()) {
        print_plan(p.stage1_plan(round.value_or(std::max(1, p.next_round() - 1))), out);
      } else {
        p.stage1();
      }
    } else if (s2->parsed()) {
      if (s2_sample->parsed()) {
        p.stage2_sample();
      } else if (s2_build->parsed()) {
        p.stage2_build();
      } else if (s2_emit->parsed()) {
        p.stage2_emit();
      } else {
        p.stage2();
      }
    } else if (eval_cmd->parsed()) {
      p.eval();
    } else if (report_cmd->parsed()) {
      out << p.report();
    } else if (run_cmd->parsed()) {
      p.split();
      p.stage1();
      if (!p.summary().stage1_complete) return 0;
      if (config.endpoint_for("m_plus") == nullptr) return 0;
      p.stage2();
      if (!config.eval.roles.empty()) {
        if (has_roles(config, config.eval.roles)) {
          p.eval();
        } else {
          out << "eval skipped: not every role in eval.roles is registered\n";
        }
      }
    }
    return 0;
  } catch (const ValidationError& e) {
    err << e.what() << "\n";
    return static_cast<int>(ExitCode::Validation);
  } catch (const ConfigurationError& e) {
    err << "configuration error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Validation);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Validation);
  } catch (const DependencyError& e) {
    err << "dependency error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Dependency);
  } catch (const EndpointError& e) {
    err << "endpoint error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::EndpointExhausted);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Failure);
  }
}

}  // namespace w2s
