#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "doctest.h"
#include "support.hpp"
#include "w2s/error.hpp"

using namespace w2s;
using namespace w2s::testing;

namespace {

// Echoes the question id as the answer; optionally fails or stalls.
class FakeBackend : public ModelBackend {
 public:
  std::atomic<int> in_flight{0}, peak{0}, calls{0};
  std::set<std::string> always_fail, hard_fail, config_fail;
  int transient_before_success = 0;
  std::mutex mu;
  std::map<std::string, int> seen;

  std::vector<std::string> complete(const PromptRequest& req, const SamplingConfig& cfg) override {
    ++calls;
    const int now = ++in_flight;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --in_flight;
    if (config_fail.count(req.question_id)) throw ConfigurationError("bad credentials");
    if (always_fail.count(req.question_id)) throw TransientError("timeout");
    if (hard_fail.count(req.question_id)) throw std::runtime_error("HTTP 400");
    {
      std::lock_guard lock(mu);
      if (seen[req.question_id]++ < transient_before_success) throw TransientError("503");
    }
    std::vector<std::string> out;
    const int n = cfg.temperature == 0.0 ? 1 : cfg.n;
    for (int i = 0; i < n; ++i)
      out.push_back("sample " + std::to_string(i) + ". The answer is " + req.question_id.substr(1) + ".");
    return out;
  }
};

std::vector<PromptRequest> prompts(int n) {
  std::vector<PromptRequest> out;
  for (int i = 0; i < n; ++i) out.push_back({"q" + std::to_string(i), "prompt", std::nullopt});
  return out;
}

EndpointSpec spec(int max_in_flight, int attempts = 2) {
  EndpointSpec s;
  s.id = "fake";
  s.sim_config = "x.json";
  s.max_in_flight = max_in_flight;
  s.retry.attempts = attempts;
  s.retry.backoff_seconds = 0.0;
  return s;
}

}  // namespace

TEST_CASE("results are ordered by input index regardless of concurrency") {
  FakeBackend fake;
  auto batch = generate(fake, spec(6), prompts(40), SamplingConfig::sampled(3, 1.0), {});
  REQUIRE(batch.responses.size() == 120);
  for (std::size_t i = 0; i < batch.responses.size(); ++i) {
    CHECK(batch.responses[i].question_id == "q" + std::to_string(i / 3));
    CHECK(batch.responses[i].sample_index == static_cast<int>(i % 3));
    CHECK(batch.responses[i].answer.canonical == std::to_string(i / 3));
    CHECK(batch.responses[i].origin == "fake");
  }
  CHECK(batch.failures.empty());
  CHECK(fake.peak.load() <= 6);
  CHECK(fake.peak.load() >= 2);
}

TEST_CASE("concurrency bound of one serializes calls") {
  FakeBackend fake;
  generate(fake, spec(1), prompts(10), SamplingConfig::greedy(), {});
  CHECK(fake.peak.load() == 1);
}

TEST_CASE("transient errors are retried, exhausted ones become failure records") {
  FakeBackend fake;
  fake.transient_before_success = 2;
  fake.always_fail = {"q3"};
  fake.hard_fail = {"q5"};
  auto batch = generate(fake, spec(4, 2), prompts(8), SamplingConfig::sampled(2, 0.7), {});
  CHECK(batch.responses.size() == 12);
  REQUIRE(batch.failures.size() == 2);
  CHECK(batch.failures[0].question_id == "q3");
  CHECK(batch.failures[0].input_index == 3);
  CHECK(batch.failures[0].samples_lost == 2);
  CHECK(batch.failures[1].question_id == "q5");
  CHECK(batch.failures[1].error.find("400") != std::string::npos);
  CHECK(batch.failure_rate(8) == doctest::Approx(0.25));
  // q5 fails at once; q3 uses the first try plus two retries.
  CHECK(fake.seen["q5"] == 0);
}

TEST_CASE("configuration errors abort the batch") {
  FakeBackend fake;
  fake.config_fail = {"q2"};
  CHECK_THROWS_AS(generate(fake, spec(2), prompts(5), SamplingConfig::greedy(), {}), ConfigurationError);
}

TEST_CASE("batch JSONL round-trips") {
  FakeBackend fake;
  fake.always_fail = {"q1"};
  auto batch = generate(fake, spec(2, 0), prompts(4), SamplingConfig::sampled(2, 1.0), {});
  auto again = parse_batch(serialize_batch(batch), {});
  CHECK(again == batch);
  TempDir dir;
  save_batch(batch, dir / "b.jsonl");
  CHECK(load_batch(dir / "b.jsonl", {}) == batch);
}

TEST_CASE("endpoint and sampling validation") {
  EndpointSpec s;
  CHECK_FALSE(validate_endpoint(s, "e").empty());
  s.id = "x";
  s.kind = EndpointKind::Remote;
  CHECK_FALSE(validate_endpoint(s, "e").empty());
  s.base_url = "http://localhost:1";
  s.model_name = "m";
  CHECK(validate_endpoint(s, "e").empty());
  s.max_in_flight = 0;
  CHECK_FALSE(validate_endpoint(s, "e").empty());

  auto cfg = SamplingConfig::sampled(0, 1.0);
  CHECK_FALSE(validate_sampling(cfg, "s").empty());
  CHECK(validate_sampling(SamplingConfig::greedy(), "s").empty());
}

TEST_CASE("make_backend refuses an unset credential variable") {
  EndpointSpec s;
  s.id = "r";
  s.kind = EndpointKind::Remote;
  s.base_url = "http://127.0.0.1:9";
  s.model_name = "m";
  s.auth_env = "W2S_TEST_SURELY_UNSET_KEY";
  ::unsetenv("W2S_TEST_SURELY_UNSET_KEY");
  CHECK_THROWS_AS(make_backend(s), ConfigurationError);
}
