#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "w2s/error.hpp"
#include "w2s/metrics.hpp"
#include "w2s/rng.hpp"
#include "w2s/simulator.hpp"

using namespace w2s;
using namespace w2s::testing;

namespace {

// LCS by trying every subsequence of the shorter sequence, longest first.
std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto& s = a.size() <= b.size() ? a : b;
  const auto& t = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
    const auto len = static_cast<std::size_t>(std::popcount(mask));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < s.size() && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      while (j < t.size() && t[j] != s[i]) ++j;
      if (j == t.size()) ok = false;
      ++j;
    }
    if (ok) best = len;
  }
  return best;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& x : v) out += (out.empty() ? "" : " ") + x;
  return out;
}

}  // namespace

TEST_CASE("rouge-l agrees with brute-force LCS on random token strings") {
  Rng rng(31337);
  const std::vector<std::string> vocab{"a", "b", "c", "d"};
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::string> x, y;
    const auto nx = uniform_index(rng, 9), ny = uniform_index(rng, 9);
    for (std::size_t j = 0; j < nx; ++j) x.push_back(vocab[uniform_index(rng, 4)]);
    for (std::size_t j = 0; j < ny; ++j) y.push_back(vocab[uniform_index(rng, 4)]);
    const auto lcs = brute_lcs(x, y);
    REQUIRE(lcs_length(x, y) == lcs);
    const double expected = (nx == 0 || ny == 0) ? 0.0 : 2.0 * lcs / static_cast<double>(nx + ny);
    REQUIRE(std::abs(rouge_l(join(x), join(y)) - expected) < 1e-12);
  }
  CHECK(whitespace_tokens("  a\tb\n c ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(rouge_l("same text", "same text") == 1.0);
}

TEST_CASE("diversity clustering and histogram") {
  CHECK(cluster_distinct({"x y z", "x y z", "x y z"}) == 1);
  CHECK(cluster_distinct({"a b c d", "e f g h", "i j k l"}) == 3);
  CHECK(cluster_distinct({"a b c d e f g h i j", "a b c d e f g h i k", "z"}) == 2);
  std::map<std::string, std::vector<std::string>> samples{
      {"q1", {"a", "a", "a"}}, {"q2", {"a", "b", "c"}}, {"q3", {"x", "x", "y"}}};
  auto h = diversity_histogram(samples);
  CHECK(h.total() == 3);
  CHECK(h.bins[1] == 1);
  CHECK(h.bins[2] == 1);
  CHECK(h.bins[3] == 1);
  h.max_n = 3;
  CHECK(h.to_csv() == "clusters,frequency\n1,1\n2,1\n3,1\n");
}

TEST_CASE("pass@k is monotone on nested prefixes") {
  Rng rng(5);
  for (int c = 0; c < 1000; ++c) {
    std::map<std::string, AnswerKey> gold;
    std::map<std::string, std::vector<AnswerKey>> all;
    const auto nq = 1 + uniform_index(rng, 6);
    for (std::size_t q = 0; q < nq; ++q) {
      const std::string id = "q" + std::to_string(q);
      gold[id] = normalize_answer("1");
      for (int k = 0; k < 10; ++k)
        all[id].push_back(uniform_index(rng, 5) == 0 ? normalize_answer("1")
                                                     : normalize_answer(std::to_string(2 + uniform_index(rng, 3))));
    }
    double prev = -1;
    for (int k = 1; k <= 10; ++k) {
      std::map<std::string, std::vector<AnswerKey>> prefix;
      for (const auto& [id, v] : all) prefix[id] = {v.begin(), v.begin() + k};
      const double p = pass_at_k(prefix, gold, k);
      REQUIRE(p >= prev);
      prev = p;
    }
  }
  std::map<std::string, AnswerKey> gold{{"a", normalize_answer("1")}, {"b", normalize_answer("2")}};
  std::map<std::string, std::vector<AnswerKey>> s{{"a", {normalize_answer("3"), normalize_answer("1")}},
                                                  {"b", {normalize_answer("3"), normalize_answer("4")}}};
  CHECK(pass_at_k(s, gold, 2) == doctest::Approx(50.0));
  s["b"].pop_back();
  CHECK_THROWS_AS(pass_at_k(s, gold, 2), DataError);
}

TEST_CASE("PGR endpoints and affine invariance") {
  CHECK(pgr(40.0, 40.0, 70.0) == 0.0);
  CHECK(pgr(40.0, 70.0, 70.0) == 100.0);
  CHECK(pgr(40.0, 55.0, 70.0) == doctest::Approx(50.0));
  CHECK(pgr(40.0, 30.0, 70.0) < 0.0);
  CHECK_THROWS_AS(pgr(50.0, 60.0, 50.0), std::domain_error);
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const double f = 100 * uniform_unit(rng), w = 100 * uniform_unit(rng), c = f + 1 + 50 * uniform_unit(rng);
    const double a = 0.1 + 3 * uniform_unit(rng), b = 20 * uniform_unit(rng) - 10;
    CHECK(std::abs(pgr(a * f + b, a * w + b, a * c + b) - pgr(f, w, c)) < 1e-9);
  }
}

TEST_CASE("delta formatting") {
  CHECK(format_delta(66.19, 62.62) == "+3.57");
  CHECK(format_delta(12.00, 14.00) == "-2.00");
  CHECK(format_delta(5.0, 5.0) == "+0.00");
}

TEST_CASE("grading, per-level accuracy and recombination") {
  DatasetManifest m;
  m.name = "lv";
  m.has_gold = true;
  m.declared_levels = {"1", "2", "3"};
  GenBatch batch;
  Rng rng(4);
  for (int i = 0; i < 60; ++i) {
    Question q;
    q.id = "q" + std::to_string(i);
    q.text = "t";
    q.gold_answer = "5";
    q.level = std::to_string(1 + i % 3);
    m.questions.push_back(q);
    if (i % 7 == 0) continue;  // unanswered
    batch.responses.push_back(response(q.id, uniform_index(rng, 2) ? "5" : "6"));
  }
  auto graded = grade_responses(batch, m, {});
  REQUIRE(graded.size() == 60);
  CHECK_FALSE(graded[0].answered);
  CHECK_FALSE(graded[0].correct);
  const double overall = accuracy_percent(graded);
  auto levels = accuracy_by_level(graded, m);
  REQUIRE(levels.size() == 3);
  CHECK(levels[0].first == "1");
  double weighted = 0;
  std::size_t total = 0;
  for (const auto& [name, st] : levels) {
    weighted += st.percent * static_cast<double>(st.count);
    total += st.count;
  }
  CHECK(total == 60);
  CHECK(std::abs(weighted / 60.0 - overall) < 1e-9);
}

TEST_CASE("greedy accuracy against a simulated endpoint") {
  DatasetManifest test;
  test.name = "t";
  test.has_gold = true;
  for (int i = 0; i < 2000; ++i) {
    Question q;
    q.id = "t" + std::to_string(i);
    q.text = "x";
    q.gold_answer = synthetic_truth(q.id);
    test.questions.push_back(q);
  }
  SimModelConfig cfg;
  cfg.seed = 12;
  cfg.default_correct_prob = 0.3;
  SimulatedBackend sim("s", cfg);
  EndpointSpec spec;
  spec.id = "s";
  spec.sim_config = "x";
  auto ev = greedy_accuracy(sim, spec, test, {});
  CHECK(std::abs(ev.accuracy - 30.0) < 3.0);
}

TEST_CASE("judge prompt matches the fixture byte for byte") {
  std::string tmpl = read_file(std::string(W2S_FIXTURE_DIR) + "/judge_template.txt");
  const std::string q = "What is 1+1?", s = "Step 1: 1+1=2. The answer is 2.";
  tmpl.replace(tmpl.find("{question}"), 10, q);
  tmpl.replace(tmpl.find("{solution}"), 10, s);
  CHECK(build_process_eval_prompt(q, s) == tmpl);
}

TEST_CASE("judge replies parse in both verdict branches") {
  auto ok = parse_process_eval(
      "Step-by-step Evaluation: Step 1 is fine. Step 2 is fine.\nFinal Judgement: **correct**\nFirst Error Step: N/A",
      "q1");
  REQUIRE(ok.judgement);
  CHECK(ok.judgement->verdict == Verdict::Correct);
  CHECK_FALSE(ok.judgement->first_error_step);
  CHECK(ok.judgement->question_id == "q1");
  CHECK(ok.judgement->evaluation.find("Step 1 is fine") != std::string::npos);

  auto wrong = parse_process_eval(
      "**Step-by-step Evaluation:** Step 3 multiplies wrongly.\n**Final Judgement:** wrong\n**First Error Step:** 3");
  REQUIRE(wrong.judgement);
  CHECK(wrong.judgement->verdict == Verdict::Wrong);
  CHECK(wrong.judgement->first_error_step == 3);

  CHECK_FALSE(parse_process_eval("Final Judgement: correct\nFirst Error Step: N/A").judgement);
  CHECK_FALSE(parse_process_eval("Step-by-step Evaluation: x\nFinal Judgement: maybe\nFirst Error Step: N/A").judgement);
  CHECK_FALSE(parse_process_eval("Step-by-step Evaluation: x\nFinal Judgement: correct\nFirst Error Step: 2").judgement);
  CHECK_FALSE(parse_process_eval("Step-by-step Evaluation: x\nFinal Judgement: wrong\nFirst Error Step: N/A").judgement);
}

TEST_CASE("report json and delta table") {
  EvalReport r;
  r.role = "m_plus";
  r.endpoint_id = "ep";
  r.dataset = "gsm";
  r.greedy_accuracy = 66.19;
  r.pass_at_k = std::make_pair(10, 90.0);
  r.baselines["strong_base"] = 62.62;
  r.questions = 100;
  auto j = nlohmann::json::parse(report_to_json({r}, 25.0));
  CHECK(j["pgr"] == 25.0);
  CHECK(j["reports"][0]["role"] == "m_plus");
  auto table = report_deltas({r});
  CHECK(table.find("+3.57") != std::string::npos);
}
