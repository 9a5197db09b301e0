#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plastar/base_sequence.hpp"
#include "plastar/structure.hpp"
#include "support/oracles.hpp"

using namespace plastar;

namespace {

Structure path10() { return BaseSequence::path().generate(10); }

}  // namespace

TEST_CASE("degree") {
  CHECK(path10().degree() == 2);
  CHECK(Structure(Signature({}, 0), 5).degree() == 0);
  CHECK(BaseSequence::grid(2).generate(5).degree() == 4);
}

TEST_CASE("dist") {
  Structure p = path10();
  CHECK(p.dist(0, 3) == 3);
  CHECK(p.dist(7, 7) == 0);
  Structure empty(Signature({}, 0), 4);
  CHECK(empty.dist(0, 3) == kInfiniteDistance);
  CHECK_THROWS_AS(p.dist(0, 99), UserError);
}

TEST_CASE("dist is a metric on components") {
  Structure g = BaseSequence::grid(2).generate(4);
  testing::TestRng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    Element a = rng.below(g.domain_size());
    Element b = rng.below(g.domain_size());
    Element c = rng.below(g.domain_size());
    CHECK(g.dist(a, b) == g.dist(b, a));
    CHECK(g.dist(a, c) <= g.dist(a, b) + g.dist(b, c));
  }
}

TEST_CASE("dist_tuples") {
  Structure p = path10();
  CHECK(p.dist_tuples({0, 9}, {5}) == 4);
  CHECK(p.dist_tuples({2, 5}, {5, 8}) == 0);
  Structure empty(Signature({}, 0), 4);
  CHECK(empty.dist_tuples({0}, {1}) == kInfiniteDistance);
  CHECK_THROWS_AS(p.dist_tuples({}, {1}), UserError);
}

TEST_CASE("neighbourhood") {
  Structure p = path10();
  CHECK(p.neighbourhood({5}, 1) == std::vector<Element>{4, 5, 6});
  CHECK(p.neighbourhood({5, 8}, 0) == std::vector<Element>{5, 8});
  Structure g = BaseSequence::grid(2).generate(2);  // side 3, corner = 0
  CHECK(g.neighbourhood({0}, 1) == std::vector<Element>{0, 1, 3});
}

TEST_CASE("neighbourhood monotonicity and union") {
  Structure g = BaseSequence::grid(2).generate(3);
  for (int l1 = 0; l1 <= 2; ++l1) {
    auto small = g.neighbourhood({5}, l1);
    auto big = g.neighbourhood({5}, l1 + 1);
    CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
  }
  auto joint = g.neighbourhood({2, 9}, 1);
  auto left = g.neighbourhood({2}, 1);
  auto right = g.neighbourhood({9}, 1);
  std::vector<Element> merged(left);
  merged.insert(merged.end(), right.begin(), right.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  CHECK(joint == merged);
}

TEST_CASE("gaifman symmetry, no self loops") {
  Structure p = path10();
  for (Element a = 0; a < p.domain_size(); ++a)
    for (Element b : p.gaifman_neighbours(a)) {
      CHECK(a != b);
      const auto& back = p.gaifman_neighbours(b);
      CHECK(std::find(back.begin(), back.end(), a) != back.end());
    }
}

TEST_CASE("induced substructure") {
  Structure p = path10();
  auto all = p.induced_substructure({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(all.structure == p);
  for (Element a = 0; a < p.domain_size(); ++a) CHECK(all.new_of_old[a] == a);

  auto mid = p.induced_substructure({4, 5, 6});
  CHECK(mid.structure.domain_size() == 3);
  CHECK(mid.structure.facts(0) == std::vector<Tuple>{{0, 1}, {1, 2}});
  CHECK(mid.old_of_new == std::vector<Element>{4, 5, 6});

  auto none = p.induced_substructure({});
  CHECK(none.structure.domain_size() == 0);
}

TEST_CASE("reduct") {
  Signature sig({{"E", 2}, {"R", 1}}, 1);
  Structure s(sig, 3, {{{0, 1}, {1, 2}}, {{0}, {2}}});
  CHECK(s.reduct(2) == s);
  Structure t = s.reduct_tau();
  CHECK(t.signature().size() == 1);
  CHECK(t.facts(0) == s.facts(0));
  CHECK(t.reduct(1) == t);
  CHECK_THROWS_AS(s.reduct(0), UserError);
}

TEST_CASE("distance on a sigma-structure equals distance on its tau-reduct") {
  Signature sig({{"E", 2}, {"R", 2}}, 1);
  // R joins far-apart elements but is not part of tau
  Structure s(sig, 6, {{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, {{0, 5}}});
  Structure t = s.reduct_tau();
  for (Element a = 0; a < 6; ++a)
    for (Element b = 0; b < 6; ++b) CHECK(s.dist(a, b) == t.dist(a, b));
  CHECK(s.dist(0, 5) == 5);
}

TEST_CASE("text format round trip is byte identical") {
  Structure p = BaseSequence::grid(2).generate(2);
  std::string text = serialize_structure(p);
  Structure q = parse_structure(text);
  CHECK(q == p);
  CHECK(serialize_structure(q) == text);

  // whitespace-tolerant parsing, comments
  Structure r = parse_structure(
      "# a path\n signature   E/2 | tau=1 \n domain 3 \n E 0 1\nE 1 2 # edge\n");
  CHECK(r.domain_size() == 3);
  CHECK(r.facts(0).size() == 2);
}

TEST_CASE("malformed structure text") {
  CHECK_THROWS_AS(parse_structure("domain 3\n"), UserError);
  CHECK_THROWS_AS(parse_structure("signature E/2 | tau=1\n"), UserError);
  CHECK_THROWS_AS(parse_structure("signature E/2 | tau=1\ndomain 2\nQ 0\n"),
                  UserError);
  CHECK_THROWS_AS(parse_structure("signature E/2 | tau=1\ndomain 2\nE 0 5\n"),
                  UserError);
  CHECK_THROWS_AS(Signature({{"E", 2}, {"E", 1}}, 1), UserError);
  CHECK_THROWS_AS(Signature({{"E", 0}}, 1), UserError);
}

TEST_CASE("fact arity mismatch is rejected") {
  CHECK_THROWS_WITH_AS(parse_structure("signature E/2 | tau=1\ndomain 3\nE 0\n"),
                       doctest::Contains("arity"), UserError);
}

TEST_CASE("serialization is canonical for random structures") {
  using namespace plastar::testing;
  TestRng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Structure s = random_structure(rng, 6);
    std::string text = serialize_structure(s);
    Structure back = parse_structure(text);
    CHECK(back == s);
    CHECK(serialize_structure(back) == text);
  }
}
