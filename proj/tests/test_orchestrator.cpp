#include <fstream>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "w2s/error.hpp"
#include "w2s/orchestrator.hpp"
#include "w2s/synth.hpp"

using namespace w2s;
using namespace w2s::testing;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "w2s");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

SynthOptions small() {
  SynthOptions o;
  o.train = 80;
  o.aux = 20;
  o.test = 30;
  return o;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

void edit_json(const std::filesystem::path& p, const std::function<void(json&)>& f) {
  auto j = json::parse(read_file(p));
  f(j);
  write_file_atomic(p, j.dump(2));
}

}  // namespace

TEST_CASE("full run, then a rerun that does nothing") {
  TempDir dir;
  const auto cfg = write_synthetic_bundle(dir.path(), small()).string();
  auto first = cli({"--config", cfg, "run"});
  REQUIRE_MESSAGE(first.code == 0, first.err);
  CHECK(first.out.find("up-to-date") == std::string::npos);
  for (const char* f : {"split/part1.jsonl", "stage1/r1/sft_hybrid_ft.jsonl", "stage1/r1/sft_full_weak.jsonl",
                        "stage2/preference.jsonl", "stage2/skip_report.json", "eval/report.json",
                        "eval/m_plus/diversity.csv", "state.json"})
    CHECK_MESSAGE(std::filesystem::exists(dir / ("out/" + std::string(f))), f);
  CHECK(first.out.find("role 'm_pro'") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "out/.lock"));

  auto second = cli({"--config", cfg, "run"});
  REQUIRE(second.code == 0);
  CHECK(count(second.out, "up-to-date") == 9);

  auto report = cli({"--config", cfg, "report"});
  CHECK(report.code == 0);
  CHECK(report.out.find("PGR:") != std::string::npos);
  auto rj = json::parse(read_file(dir / "out/eval/report.json"));
  CHECK(rj.contains("pgr"));
  CHECK(rj["process_level"].contains("weak_ft"));

  // Curation artifacts never carry gold answers.
  for (const char* f : {"split/part2_questions.jsonl", "stage1/r1/sft_hybrid_ft.jsonl", "stage2/preference.jsonl"})
    CHECK(read_file(dir / ("out/" + std::string(f))).find("gold_answer") == std::string::npos);
}

TEST_CASE("changing a stage2 setting reruns only the affected units") {
  TempDir dir;
  const auto cfg = write_synthetic_bundle(dir.path(), small()).string();
  REQUIRE(cli({"-c", cfg, "split"}).code == 0);
  REQUIRE(cli({"-c", cfg, "stage1"}).code == 0);
  REQUIRE(cli({"-c", cfg, "stage2"}).code == 0);
  auto r = cli({"-c", cfg, "stage2", "--tau", "0.9"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("[stage2.sample] up-to-date") != std::string::npos);
  CHECK(r.out.find("[stage2.build] up-to-date") == std::string::npos);
  auto pairs = read_file(dir / "out/stage2/preference.jsonl");
  for (std::size_t p = pairs.find("\"confidence\":"); p != std::string::npos; p = pairs.find("\"confidence\":", p + 1))
    CHECK(std::stod(pairs.substr(p + 13)) >= 0.9 - 1e-9);
}

TEST_CASE("stages out of order fail with the dependency exit code") {
  TempDir dir;
  const auto cfg = write_synthetic_bundle(dir.path(), small()).string();
  auto s2 = cli({"-c", cfg, "stage2"});
  CHECK(s2.code == 3);
  CHECK(s2.err.find("r1.sft.hybrid_ft") != std::string::npos);
  auto s1 = cli({"-c", cfg, "stage1", "select"});
  CHECK(s1.code == 3);
  auto resume = cli({"-c", cfg, "--resume", "split"});
  CHECK(resume.code == 3);
}

TEST_CASE("validation failures exit with code 2") {
  TempDir dir;
  const auto cfg = write_synthetic_bundle(dir.path(), small()).string();
  CHECK(cli({"-c", cfg, "validate"}).code == 0);
  auto bad = cli({"-c", cfg, "--stage-overrides", "stage2.tau=0", "validate"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("stage2.tau") != std::string::npos);
  CHECK(cli({"-c", cfg, "no-such-command"}).code == 2);
  CHECK(cli({"-c", (dir / "missing.json").string(), "validate"}).code == 2);
}

TEST_CASE("tampered artifacts are detected on resume") {
  TempDir dir;
  const auto cfg = write_synthetic_bundle(dir.path(), small()).string();
  REQUIRE(cli({"-c", cfg, "split"}).code == 0);
  REQUIRE(cli({"-c", cfg, "stage1"}).code == 0);
  CHECK(cli({"-c", cfg, "--resume", "stage1"}).code == 0);
  {
    std::ofstream f(dir / "out/stage1/r1/weak.jsonl", std::ios::app);
    f << "\n";
  }
  auto r = cli({"-c", cfg, "--resume", "stage1"});
  CHECK(r.code == 3);
  CHECK(r.err.find("weak.jsonl") != std::string::npos);
  // Without --resume the modified input is regenerated.
  auto regen = cli({"-c", cfg, "stage1"});
  CHECK(regen.code == 0);
  CHECK(regen.out.find("[r1.gen-weak] up-to-date") == std::string::npos);
  CHECK(cli({"-c", cfg, "--resume", "stage1"}).code == 0);
}

TEST_CASE("endpoint exhaustion exits with code 4 and keeps earlier state") {
  TempDir dir;
  auto o = small();
  const auto cfg = write_synthetic_bundle(dir.path(), o).string();
  REQUIRE(cli({"-c", cfg, "split"}).code == 0);
  auto qs = load_manifest(dir / "out/split/part2_questions.jsonl");
  edit_json(dir / "sim/weak.json", [&](json& j) {
    j["fail_ids"] = json::array();
    for (std::size_t i = 0; i < qs.size() * 3 / 4; ++i) j["fail_ids"].push_back(qs.questions[i].id);
  });
  edit_json(cfg, [](json& j) {
    for (auto& e : j["endpoints"]) e["retry"] = {{"attempts", 1}, {"backoff", 0}};
  });
  auto r = cli({"-c", cfg, "stage1", "gen-weak"});
  CHECK(r.code == 4);
  CHECK(r.err.find("max_failure_rate") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "out/state.json"));
  CHECK(cli({"-c", cfg, "--resume", "stage1", "gen-weak"}).code == 4);
  auto relaxed = cli({"-c", cfg, "--stage-overrides", "backend.max_failure_rate=0.9", "stage1", "gen-weak"});
  CHECK(relaxed.code == 0);
}

TEST_CASE("a concurrent run on the same output directory is refused") {
  TempDir dir;
  const auto cfg = write_synthetic_bundle(dir.path(), small());
  std::ostringstream log;
  Pipeline holder(load_config(cfg), false, log);
  CHECK_THROWS_AS(Pipeline(load_config(cfg), false, log), DependencyError);
  CHECK(cli({"-c", cfg.string(), "split"}).code == 3);
}

TEST_CASE("identical configs give byte-identical outputs") {
  TempDir a, b;
  const auto ca = write_synthetic_bundle(a.path(), small()).string();
  const auto cb = write_synthetic_bundle(b.path(), small()).string();
  REQUIRE(cli({"-c", ca, "run"}).code == 0);
  REQUIRE(cli({"-c", cb, "run"}).code == 0);
  for (const char* f : {"stage1/r1/sft_weak_ft.jsonl", "stage1/r1/sft_icl_ft.jsonl", "stage1/r1/sft_hybrid_ft.jsonl",
                        "stage1/r1/sft_full_weak.jsonl", "stage2/preference.jsonl", "stage2/skip_report.json",
                        "eval/report.json", "eval/report.txt", "state.json"})
    CHECK_MESSAGE(read_file(a / ("out/" + std::string(f))) == read_file(b / ("out/" + std::string(f))), f);
}

TEST_CASE("iterative rounds pause for fine-tuned endpoints and resume when registered") {
  TempDir dir;
  auto o = small();
  o.rounds = 2;
  o.accuracy.erase("weak_ft.r1");
  o.accuracy.erase("icl_ft.r1");
  const auto cfg = write_synthetic_bundle(dir.path(), o).string();
  auto first = cli({"-c", cfg, "run"});
  REQUIRE(first.code == 0);
  CHECK(first.out.find("stage1 paused before round 2") != std::string::npos);
  CHECK(first.out.find("weak_ft.r1") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "out/stage2"));
  auto plan = cli({"-c", cfg, "stage1", "plan-round"});
  CHECK(plan.code == 3);

  // Register the round-1 models and continue.
  write_file_atomic(dir / "sim/weak_ft_r1.json", R"({"seed": 101, "default_correct_prob": 0.5})");
  write_file_atomic(dir / "sim/icl_ft_r1.json", R"({"seed": 102, "default_correct_prob": 0.55})");
  edit_json(dir / "config.json", [](json& j) {
    j["endpoints"].push_back({{"id", "sim-weak_ft.r1"}, {"sim_config", "sim/weak_ft_r1.json"}, {"role", "weak_ft.r1"}});
    j["endpoints"].push_back({{"id", "sim-icl_ft.r1"}, {"sim_config", "sim/icl_ft_r1.json"}, {"role", "icl_ft.r1"}});
  });
  auto plan2 = cli({"-c", cfg, "stage1", "plan-round", "--round", "1"});
  CHECK(plan2.code == 0);
  CHECK(plan2.out.find("generate r2.weak from role 'weak_ft.r1'") != std::string::npos);
  auto second = cli({"-c", cfg, "run"});
  REQUIRE_MESSAGE(second.code == 0, second.err);
  CHECK(second.out.find("[r1.gen-weak] up-to-date") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "out/stage1/r2/sft_hybrid_ft.jsonl"));
  CHECK_FALSE(std::filesystem::exists(dir / "out/stage1/r2/sft_full_weak.jsonl"));
  CHECK(std::filesystem::exists(dir / "out/stage2/preference.jsonl"));
  auto state = json::parse(read_file(dir / "out/state.json"));
  CHECK(state["round"] == 2);
  CHECK(state["endpoint_ids"]["weak_ft.r1"] == "sim-weak_ft.r1");
}

TEST_CASE("synth writes a runnable bundle through the CLI") {
  TempDir dir;
  auto r = cli({"synth", "--out", (dir / "b").string(), "--train", "12", "--aux", "2", "--test", "5"});
  REQUIRE(r.code == 0);
  CHECK(load_manifest(dir / "b/data/train.jsonl").size() == 12);
  CHECK(cli({"-c", (dir / "b/config.json").string(), "validate"}).code == 0);
}
