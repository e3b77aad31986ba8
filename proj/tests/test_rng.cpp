#include <set>

#include "doctest.h"
#include "w2s/digest.hpp"
#include "w2s/rng.hpp"

using namespace w2s;

TEST_CASE("fnv1a matches published test vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("derived seeds separate labels and indices") {
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(5, "x", 3) == derive_seed(5, "x", 3));
}

TEST_CASE("uniform_index stays in range and covers it") {
  Rng rng(42);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    auto v = uniform_index(rng, 7);
    REQUIRE(v < 7);
    ++hits[v];
  }
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("uniform_unit lies in [0,1) with mean near one half") {
  Rng rng(9);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    double u = uniform_unit(rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("sample_without_replacement yields distinct indices and is reproducible") {
  Rng a(3), b(3);
  auto x = sample_without_replacement(50, 20, a);
  auto y = sample_without_replacement(50, 20, b);
  CHECK(x == y);
  CHECK(std::set<std::size_t>(x.begin(), x.end()).size() == 20);
  Rng c(3);
  CHECK(sample_without_replacement(5, 10, c).size() == 5);
}

TEST_CASE("seeded_shuffle is a permutation") {
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  Rng rng(1);
  seeded_shuffle(v, rng);
  std::multiset<int> s(v.begin(), v.end());
  CHECK(s == std::multiset<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
