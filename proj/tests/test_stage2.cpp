#include <array>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "w2s/error.hpp"
#include "w2s/simulator.hpp"
#include "w2s/stage2.hpp"

using namespace w2s;
using namespace w2s::testing;

namespace {

// Symbol 0 is an unparseable sample; 1..3 are the answers "1","2","3".
std::vector<GenResponse> samples_of(const std::vector<int>& symbols) {
  std::vector<GenResponse> out;
  for (std::size_t i = 0; i < symbols.size(); ++i)
    out.push_back(symbols[i] == 0 ? garbled("q", static_cast<int>(i))
                                  : response("q", std::to_string(symbols[i]), static_cast<int>(i)));
  return out;
}

struct Oracle {
  bool confident = false;
  int modal = 0;  // symbol, 0 when absent
  int plus = 0, minus = 0;
};

// Counts symbols directly; tau = tau_tenths / 10 keeps the threshold exact.
Oracle oracle(const std::vector<int>& symbols, int tau_tenths) {
  std::array<int, 4> count{};
  for (int s : symbols) ++count[s];
  int best = 0, which = 0, ties = 0;
  for (int s = 1; s <= 3; ++s) {
    if (count[s] > best) {
      best = count[s];
      which = s;
      ties = 1;
    } else if (count[s] == best && best > 0) {
      ++ties;
    }
  }
  Oracle o;
  const int n = static_cast<int>(symbols.size());
  if (best > 0 && ties == 1) o.modal = which;
  o.confident = o.modal != 0 && 10 * best >= tau_tenths * n;
  if (o.confident) {
    o.plus = best;
    o.minus = n - best;
  }
  return o;
}

}  // namespace

TEST_CASE("worked instance: 8 of 10 agree") {
  std::vector<int> s{1, 1, 1, 1, 2, 1, 1, 3, 1, 1};
  auto summary = compute_confidence("q", samples_of(s), 0.6);
  CHECK(summary.confident);
  CHECK(summary.modal_count == 8);
  CHECK(summary.confidence == doctest::Approx(0.8));
  REQUIRE(summary.modal_answer);
  CHECK(summary.modal_answer->canonical == "1");
  auto part = partition_samples(summary);
  CHECK(part.plus.size() == 8);
  CHECK(part.minus.size() == 2);
}

TEST_CASE("exhaustive enumeration agrees with the counting oracle") {
  std::size_t cases = 0, mismatches = 0;
  for (int tau_tenths : {1, 5, 6, 10}) {
    const double tau = tau_tenths / 10.0;
    for (int n = 1; n <= 6; ++n) {
      std::vector<int> s(static_cast<std::size_t>(n), 0);
      while (true) {
        const auto expect = oracle(s, tau_tenths);
        auto summary = compute_confidence("q", samples_of(s), tau);
        ++cases;
        bool ok = summary.confident == expect.confident;
        if (expect.modal != 0) {
          ok = ok && summary.modal_answer && summary.modal_answer->canonical == std::to_string(expect.modal);
        } else {
          ok = ok && !summary.modal_answer;
        }
        if (expect.confident) {
          auto part = partition_samples(summary);
          ok = ok && static_cast<int>(part.plus.size()) == expect.plus &&
               static_cast<int>(part.minus.size()) == expect.minus;
        } else {
          CHECK_THROWS_AS(partition_samples(summary), DataError);
        }
        // Pair decisions for every weak answer, a missing weak response and both recipes.
        for (int weak_symbol = -1; weak_symbol <= 3; ++weak_symbol) {
          GenResponse weak = weak_symbol == 0 ? garbled("q") : response("q", std::to_string(weak_symbol));
          const GenResponse* wp = weak_symbol < 0 ? nullptr : &weak;
          for (auto recipe : {PairRecipe::WeakInPair, PairRecipe::SelfGenerated}) {
            Rng rng(static_cast<std::uint64_t>(cases));
            auto d = build_pair(summary, "text", wp, rng, recipe);
            std::optional<SkipReason> skip;
            ResponseSource chosen_src = ResponseSource::Strong, rejected_src = ResponseSource::Strong;
            if (!expect.confident) {
              skip = SkipReason::Unconfident;
            } else if (recipe == PairRecipe::SelfGenerated) {
              if (expect.minus == 0) skip = SkipReason::EmptyMinus;
            } else if (!wp) {
              skip = SkipReason::WeakMissing;
            } else if (weak_symbol == expect.modal) {
              if (expect.minus == 0) skip = SkipReason::EmptyMinus;
              chosen_src = ResponseSource::Weak;
            } else {
              rejected_src = ResponseSource::Weak;
            }
            bool dok = d.skip == skip && d.pair.has_value() == !skip.has_value();
            if (dok && d.pair) {
              const auto& p = *d.pair;
              dok = p.chosen_source == chosen_src && p.rejected_source == rejected_src &&
                    extract_final_answer(p.chosen).canonical == std::to_string(expect.modal) &&
                    !answers_equal(extract_final_answer(p.rejected), p.a_plus);
              if (chosen_src == ResponseSource::Weak) dok = dok && p.chosen == weak.text;
              if (rejected_src == ResponseSource::Weak) dok = dok && p.rejected == weak.text;
            }
            ok = ok && dok;
          }
        }
        if (!ok) ++mismatches;
        // Next sequence over symbols {0,1,2,3}.
        int i = 0;
        while (i < n && s[static_cast<std::size_t>(i)] == 3) s[static_cast<std::size_t>(i++)] = 0;
        if (i == n) break;
        ++s[static_cast<std::size_t>(i)];
      }
    }
  }
  CHECK(cases == 4 * (4 + 16 + 64 + 256 + 1024 + 4096));
  CHECK(mismatches == 0);
}

TEST_CASE("ties and all-unparseable samples are never confident") {
  auto tie = compute_confidence("q", samples_of({1, 1, 2, 2}), 0.5);
  CHECK_FALSE(tie.confident);
  CHECK_FALSE(tie.modal_answer);
  auto none = compute_confidence("q", samples_of({0, 0, 0}), 0.1);
  CHECK_FALSE(none.confident);
  CHECK(none.modal_count == 0);
}

TEST_CASE("numeric surface variants share one class") {
  std::vector<GenResponse> s{response("q", "0.5", 0), response("q", "1/2", 1), response("q", "\\frac{1}{2}", 2),
                             response("q", "3", 3)};
  auto summary = compute_confidence("q", s, 0.6);
  CHECK(summary.confident);
  CHECK(summary.modal_count == 3);
}

TEST_CASE("batch pair construction, persistence and validation") {
  std::vector<std::string> ids;
  for (int i = 0; i < 300; ++i) ids.push_back("q" + std::to_string(i));
  auto qs = manifest_of(ids);
  SimModelConfig strong_cfg;
  strong_cfg.seed = 5;
  strong_cfg.default_correct_prob = 0.7;
  strong_cfg.wrong_alternatives = 3;
  SimModelConfig weak_cfg;
  weak_cfg.seed = 6;
  weak_cfg.default_correct_prob = 0.4;
  SimulatedBackend strong("m_plus", strong_cfg), weak_sim("weak", weak_cfg);
  EndpointSpec spec;
  spec.id = "m_plus";
  spec.sim_config = "x";
  auto samples = sample_for_confidence(strong, spec, qs, 10, 1.0, {});
  CHECK(samples.responses.size() == 3000);
  GenBatch weak = generate(weak_sim, spec, [&] {
    std::vector<PromptRequest> r;
    for (const auto& q : qs.questions) r.push_back({q.id, q.text, std::nullopt});
    return r;
  }(), SamplingConfig::greedy(), {});
  weak.responses.erase(weak.responses.begin());  // q0 loses its weak response

  for (auto recipe : {PairRecipe::WeakInPair, PairRecipe::SelfGenerated}) {
    auto result = build_preference_pairs(qs, samples, weak, 10, 0.6, recipe, 17);
    CHECK_FALSE(result.pairs.empty());
    CHECK(validate_preference_pairs(result.pairs, {}, 0.6, recipe).empty());
    std::size_t skipped = 0;
    for (const auto& [r, v] : result.skipped) skipped += v.size();
    CHECK(result.pairs.size() + skipped == 300);
    CHECK(std::is_sorted(result.pairs.begin(), result.pairs.end(),
                         [](const auto& a, const auto& b) { return a.question_id < b.question_id; }));
    auto again = build_preference_pairs(qs, samples, weak, 10, 0.6, recipe, 17);
    CHECK(serialize_preference_pairs(again.pairs) == serialize_preference_pairs(result.pairs));
    CHECK(parse_preference_pairs(serialize_preference_pairs(result.pairs)) == result.pairs);

    TempDir dir;
    emit_preference_dataset(result, dir / "p.jsonl", dir / "skips.json");
    CHECK(load_preference_pairs(dir / "p.jsonl") == result.pairs);
    auto report = nlohmann::json::parse(read_file(dir / "skips.json"));
    CHECK(report["emitted"] == result.pairs.size());
  }

  auto result = build_preference_pairs(qs, samples, weak, 10, 0.6, PairRecipe::WeakInPair, 17);
  auto bad = result.pairs;
  std::swap(bad[0].chosen, bad[0].rejected);
  CHECK_FALSE(validate_preference_pairs(bad, {}, 0.6, PairRecipe::WeakInPair).empty());
  bad = result.pairs;
  bad[0].confidence = 0.5;
  CHECK_FALSE(validate_preference_pairs(bad, {}, 0.6, PairRecipe::WeakInPair).empty());
  bad = result.pairs;
  bad[0].chosen_source = bad[0].rejected_source = ResponseSource::Strong;
  CHECK_FALSE(validate_preference_pairs(bad, {}, 0.6, PairRecipe::WeakInPair).empty());
}
