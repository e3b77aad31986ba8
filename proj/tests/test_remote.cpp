#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "w2s/remote.hpp"

using namespace w2s;
using namespace w2s::testing;
using nlohmann::json;

namespace {

// Minimal OpenAI-compatible server: reasoning calls get n choices, calls
// whose prompt ends with the answer cue get the answer.
class MockServer {
 public:
  std::atomic<int> requests{0};
  std::atomic<int> fail_first{0};
  std::mutex mu;
  std::vector<json> bodies;
  std::vector<std::string> auth;

  MockServer() {
    auto handler = [this](bool chat) {
      return [this, chat](const httplib::Request& req, httplib::Response& res) {
        ++requests;
        auto body = json::parse(req.body);
        {
          std::lock_guard lock(mu);
          bodies.push_back(body);
          auth.push_back(req.get_header_value("Authorization"));
        }
        if (fail_first > 0) {
          --fail_first;
          res.status = 503;
          return;
        }
        if (body.value("model", "") == "missing") {
          res.status = 404;
          res.set_content("no such model", "text/plain");
          return;
        }
        const std::string prompt = chat ? body["messages"][0]["content"].get<std::string>()
                                        : body["prompt"].get<std::string>();
        const bool answer_call = prompt.size() >= 13 && prompt.ends_with("The answer is");
        json choices = json::array();
        const int n = body.value("n", 1);
        // Reverse order on the wire to check index sorting.
        for (int i = n - 1; i >= 0; --i) {
          std::string text = answer_call ? " 42" : " Step " + std::to_string(i) + " reasoning.";
          json c{{"index", i}};
          if (chat) {
            c["message"] = {{"role", "assistant"}, {"content", text}};
          } else {
            c["text"] = text;
          }
          choices.push_back(c);
        }
        res.set_content(json{{"choices", choices}}.dump(), "application/json");
      };
    };
    server_.Post("/api/v1/completions", handler(false));
    server_.Post("/api/v1/chat/completions", handler(true));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/api"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

EndpointSpec remote_spec(const std::string& url, WireApi api = WireApi::Completions) {
  EndpointSpec s;
  s.id = "mock";
  s.kind = EndpointKind::Remote;
  s.base_url = url;
  s.model_name = "tiny";
  s.api = api;
  s.request_timeout = 5;
  s.max_in_flight = 4;
  s.retry.attempts = 3;
  s.retry.backoff_seconds = 0.01;
  return s;
}

}  // namespace

TEST_CASE("request body follows the wire format") {
  RemoteBackend b(remote_spec("http://x:1"));
  SamplingConfig cfg = SamplingConfig::sampled(4, 0.7);
  cfg.stop = {"\n\n"};
  cfg.seed = 5;
  auto body = b.request_body("hello", cfg);
  CHECK(body["model"] == "tiny");
  CHECK(body["prompt"] == "hello");
  CHECK(body["n"] == 4);
  CHECK(body["temperature"] == 0.7);
  CHECK(body["stop"] == json::array({"\n\n"}));
  CHECK(body["seed"] == 5);
  RemoteBackend chat(remote_spec("http://x:1", WireApi::Chat));
  CHECK(chat.request_body("hi", SamplingConfig::greedy())["messages"][0]["content"] == "hi");
}

TEST_CASE("choices are ordered by index") {
  json payload{{"choices", {{{"index", 1}, {"text", "b"}}, {{"index", 0}, {"text", "a"}}}}};
  CHECK(parse_completion_choices(payload, WireApi::Completions) == std::vector<std::string>{"a", "b"});
  CHECK_THROWS(parse_completion_choices(json{{"x", 1}}, WireApi::Completions));
}

TEST_CASE("two-stage generation against a mock server, with auth and retries") {
  MockServer server;
  ::setenv("W2S_TEST_KEY", "sekrit", 1);
  auto spec = remote_spec(server.url());
  spec.auth_env = "W2S_TEST_KEY";
  auto backend = make_backend(spec);
  server.fail_first = 2;
  std::vector<PromptRequest> reqs;
  for (int i = 0; i < 6; ++i)
    reqs.push_back({"q" + std::to_string(i), "Question: ?\nAnswer:", std::string("The answer is")});
  auto batch = generate(*backend, spec, reqs, SamplingConfig::sampled(2, 1.0), {});
  CHECK(batch.failures.empty());
  REQUIRE(batch.responses.size() == 12);
  CHECK(batch.responses[0].text == " Step 0 reasoning. The answer is 42");
  CHECK(batch.responses[1].text == " Step 1 reasoning. The answer is 42");
  for (const auto& r : batch.responses) CHECK(r.answer.canonical == "42");
  for (const auto& a : server.auth) CHECK(a == "Bearer sekrit");
  // 6 reasoning calls, 12 answer calls, 2 rejected attempts.
  CHECK(server.requests.load() == 20);
  std::lock_guard lock(server.mu);
  int answer_calls = 0;
  for (const auto& b : server.bodies)
    if (b["temperature"] == 0.0) {
      ++answer_calls;
      CHECK(b["n"] == 1);
      CHECK(b["stop"] == json::array({"\n"}));
    }
  CHECK(answer_calls == 12);
}

TEST_CASE("chat api and permanent errors") {
  MockServer server;
  auto spec = remote_spec(server.url(), WireApi::Chat);
  auto backend = make_backend(spec);
  auto ok = generate(*backend, spec, {{"a", "hi", std::nullopt}}, SamplingConfig::greedy(), {});
  REQUIRE(ok.responses.size() == 1);
  CHECK(ok.responses[0].text == " Step 0 reasoning.");

  spec.model_name = "missing";
  auto bad_backend = make_backend(spec);
  auto bad = generate(*bad_backend, spec, {{"a", "hi", std::nullopt}}, SamplingConfig::greedy(), {});
  REQUIRE(bad.failures.size() == 1);
  CHECK(bad.failures[0].error.find("404") != std::string::npos);
  CHECK(server.requests.load() == 2);  // 404 is not retried
}

TEST_CASE("unreachable endpoint exhausts retries") {
  auto spec = remote_spec("http://127.0.0.1:9");
  spec.retry.attempts = 1;
  spec.request_timeout = 1;
  auto backend = make_backend(spec);
  auto batch = generate(*backend, spec, {{"a", "hi", std::nullopt}}, SamplingConfig::greedy(), {});
  CHECK(batch.responses.empty());
  REQUIRE(batch.failures.size() == 1);
  CHECK(batch.failure_rate(1) == 1.0);
}
