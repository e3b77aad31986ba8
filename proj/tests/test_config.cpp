#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "w2s/config.hpp"
#include "w2s/error.hpp"
#include "w2s/synth.hpp"

using namespace w2s;
using namespace w2s::testing;
using nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({
    "version": 1,
    "seed": 3,
    "data": {"train": "train.jsonl", "test": "test.jsonl"},
    "endpoints": [
      {"id": "w", "kind": "simulated", "sim_config": "w.json", "role": "weak"},
      {"id": "s", "kind": "remote", "base_url": "http://localhost:8000", "model": "m",
       "roles": ["strong_base", "m_plus"], "max_in_flight": 2, "retry": {"attempts": 1, "backoff": 0}}
    ],
    "eval": {"roles": ["weak"], "baselines": {"fixed": 50.0, "ref": "strong_base"}}
  })");
}

bool mentions(const std::vector<std::string>& diags, const std::string& needle) {
  for (const auto& d : diags)
    if (d.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("a minimal config parses with defaults") {
  auto c = parse_config(minimal(), "/base");
  CHECK(validate(c).empty());
  CHECK(c.stage2.n == 10);
  CHECK(c.stage2.tau == 0.6);
  CHECK(c.stage1.demo_count == 4);
  CHECK(c.split.seed == 3);
  CHECK(c.stage2.seed == 3);
  CHECK(c.resolve("x/y.jsonl") == std::filesystem::path("/base/x/y.jsonl"));
  REQUIRE(c.endpoint_for("m_plus"));
  CHECK(c.endpoint_for("m_plus")->spec.id == "s");
  CHECK(c.endpoint_for("m_plus")->spec.retry.attempts == 1);
  CHECK(c.endpoint_for("nobody") == nullptr);
  CHECK(std::get<double>(c.eval.baselines.at("fixed")) == 50.0);
  CHECK(std::get<std::string>(c.eval.baselines.at("ref")) == "strong_base");
}

TEST_CASE("overrides reach nested keys") {
  auto doc = minimal();
  apply_override(doc, "stage2.tau=0.8");
  apply_override(doc, "stage2.recipe=self_generated");
  apply_override(doc, "stage1.rounds=2");
  auto c = parse_config(doc, "/b");
  CHECK(c.stage2.tau == 0.8);
  CHECK(c.stage2.recipe == PairRecipe::SelfGenerated);
  CHECK(c.stage1.rounds == 2);
  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ValidationError);
  apply_override(doc, "endpoints.1.max_in_flight=5");
  CHECK(parse_config(doc, "/b").endpoints.at(1).spec.max_in_flight == 5);
  CHECK(doc["endpoints"].is_array());
  CHECK_THROWS_AS(apply_override(doc, "endpoints.7.id=x"), ValidationError);
}

TEST_CASE("validation reports every violated invariant with its field path") {
  auto doc = minimal();
  doc["version"] = 2;
  doc["stage2"]["tau"] = 1.5;
  doc["stage2"]["n"] = 1;
  doc["eval"]["k"] = 20;
  doc["endpoints"][0]["role"] = "strong_base";
  auto diags = validate(parse_config(doc, "/b"));
  CHECK(mentions(diags, "version"));
  CHECK(mentions(diags, "stage2.tau"));
  CHECK(mentions(diags, "stage2.n"));
  CHECK(mentions(diags, "eval.k"));
  CHECK(mentions(diags, "'strong_base' is claimed"));
  CHECK(mentions(diags, "role 'weak'"));

  auto bad_types = minimal();
  bad_types["stage2"]["tau"] = "high";
  bad_types["endpoints"][0]["kind"] = "quantum";
  try {
    parse_config(bad_types, "/b");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(mentions(e.diagnostics(), "stage2.tau"));
    CHECK(mentions(e.diagnostics(), "endpoints[0].kind"));
  }

  auto pgr_partial = minimal();
  pgr_partial["eval"]["pgr"] = {{"floor", "weak"}};
  CHECK(mentions(validate(parse_config(pgr_partial, "/b")), "eval.pgr"));
}

TEST_CASE("load_config resolves relative to the file and applies overrides") {
  TempDir dir;
  auto path = write_synthetic_bundle(dir.path(), {.train = 10, .aux = 4, .test = 5});
  CHECK(mentions(validate(load_config(path, {"stage2.n=6"})), "eval.k"));
  auto c = load_config(path, {"stage2.n=6", "eval.k=6"});
  CHECK(c.base_dir == dir.path());
  CHECK(c.stage2.n == 6);
  CHECK(validate(c).empty());
  CHECK(c.out_path() == dir.path() / "out");
  write_file_atomic(dir / "broken.json", "{ nope");
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ValidationError);
}
