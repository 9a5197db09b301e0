#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "plastar/base_sequence.hpp"
#include "plastar/network.hpp"

using namespace plastar;

namespace {

PlaNetwork unary_net(double theta) {
  return parse_network("sigma R/1 | tau=0\nprob R(x): " + format_double(theta) + "\n");
}

Structure bare(int n) { return BaseSequence::empty_set().generate(n); }

}  // namespace

TEST_CASE("mp rank") {
  CHECK(PlaNetwork::trivial(Signature({{"E", 2}}, 1)).mp_rank() == -1);
  CHECK(unary_net(0.5).mp_rank() == 0);
  PlaNetwork chain = parse_network(
      "sigma R1/1 R2/1 R3/1 | tau=0\n"
      "prob R1(x): 0.5\n"
      "prob R2(x): R1(x)\n"
      "prob R3(x): R2(x)\n");
  CHECK(chain.mp_rank() == 2);
  CHECK(chain.mp(0) == 0);
  CHECK(chain.mp(2) == 2);
}

TEST_CASE("network validation") {
  CHECK_THROWS_WITH_AS(parse_network("sigma R/1 Q/1 | tau=0\n"
                                     "prob R(x): Q(x)\n"
                                     "prob Q(x): R(x)\n"),
                       doctest::Contains("cycle"), UserError);
  CHECK_THROWS_WITH_AS(parse_network("sigma R/1 | tau=0\nprob R(x): R(x)\n"),
                       doctest::Contains("itself"), UserError);
  CHECK_THROWS_AS(parse_network("sigma E/2 R/1 | tau=1\n"), UserError);
  // narrowing parents below the used symbols is rejected
  CHECK_THROWS_WITH_AS(parse_network("sigma R/1 Q/1 | tau=0\n"
                                     "prob R(x): 0.5\n"
                                     "prob Q(x): R(x)\n"
                                     "parents Q:\n"),
                       doctest::Contains("par(R)"), UserError);
}

TEST_CASE("network text round trip") {
  PlaNetwork net = parse_network(
      "sigma E/2 R/1 Q/1 | tau=1\n"
      "prob R(x): am[E(x, y) : y : top]\n"
      "prob Q(x): and(R(x), 0.5)\n");
  std::string text = serialize_network(net);
  PlaNetwork back = parse_network(text);
  CHECK(serialize_network(back) == text);
  CHECK(back.parents(2) == std::vector<int>{1});
}

TEST_CASE("world probability") {
  PlaNetwork net = unary_net(0.5);
  // n=2: every world has probability 1/4
  for (int mask = 0; mask < 4; ++mask) {
    std::vector<Tuple> facts;
    for (Element a = 0; a < 2; ++a)
      if (mask & (1 << a)) facts.push_back({a});
    Structure w(net.sigma(), 2, {facts});
    CHECK(world_probability(net, w) == doctest::Approx(0.25));
  }

  PlaNetwork certain = unary_net(1.0);
  Structure all(certain.sigma(), 2, {{{0}, {1}}});
  Structure partial(certain.sigma(), 2, {{{0}}});
  CHECK(world_probability(certain, all) == 1.0);
  CHECK(world_probability(certain, partial) == 0.0);

  PlaNetwork three = unary_net(0.3);
  Structure one(three.sigma(), 1, {{{0}}});
  CHECK(world_probability(three, one) == doctest::Approx(0.3));
}

TEST_CASE("exact distribution") {
  PlaNetwork net = unary_net(0.5);
  int count = 0;
  double total = 0;
  for_each_world(net, bare(2), 1 << 20, [&](const Structure&, double p) {
    ++count;
    total += p;
    CHECK(p == doctest::Approx(0.25));
  });
  CHECK(count == 4);
  CHECK(std::fabs(total - 1.0) <= 1e-9);

  // sigma = tau: the single world carries probability 1
  PlaNetwork trivial = PlaNetwork::trivial(Signature({{"E", 2}}, 1));
  Structure base = BaseSequence::path().generate(3);
  int worlds = 0;
  for_each_world(trivial, base, 16, [&](const Structure& w, double p) {
    ++worlds;
    CHECK(p == 1.0);
    CHECK(w == base);
  });
  CHECK(worlds == 1);
}

TEST_CASE("exact distribution sums to one with nonuniform theta") {
  PlaNetwork net = parse_network(
      "sigma E/2 R/1 | tau=1\n"
      "prob R(x): or(0.2, max[E(x, y) : y : top])\n");
  Structure base = BaseSequence::path().generate(3);
  double total = 0;
  for_each_world(net, base, 1 << 20,
                 [&](const Structure&, double p) { total += p; });
  CHECK(std::fabs(total - 1.0) <= 1e-9);
}

TEST_CASE("exact probability of an existential event") {
  double p = exact_probability(unary_net(0.5), bare(4),
                               *parse_formula("exists x . R(x)", unary_net(0.5).sigma()),
                               {}, 1 << 20);
  CHECK(p == doctest::Approx(15.0 / 16).epsilon(1e-12));
}

TEST_CASE("enumeration budget") {
  CHECK_THROWS_AS(
      for_each_world(unary_net(0.5), bare(30), 1 << 10, [](const Structure&, double) {}),
      BudgetError);
}

TEST_CASE("sampling determinism and extremes") {
  PlaNetwork net = unary_net(1.0);
  World w = sample_world(net, bare(5), 42);
  CHECK(w.structure.facts(0).size() == 5);
  PlaNetwork zero = unary_net(0.0);
  CHECK(sample_world(zero, bare(5), 42).structure.facts(0).empty());

  PlaNetwork half = parse_network("sigma E/2 R/1 | tau=1\nprob R(x): 0.5\n");
  Structure base = BaseSequence::path().generate(16);
  std::string a = serialize_structure(sample_world(half, base, 7).structure);
  std::string b = serialize_structure(sample_world(half, base, 7).structure);
  std::string c = serialize_structure(sample_world(half, base, 8).structure);
  CHECK(a == b);
  CHECK(a != c);
  // the sampled world expands its base exactly
  CHECK(sample_world(half, base, 7).structure.reduct_tau() == base);
}

TEST_CASE("estimate agrees with enumeration and reports a radius") {
  PlaNetwork net = unary_net(0.5);
  auto event = parse_formula("exists x . R(x)", net.sigma());
  double exact = exact_probability(net, bare(4), *event, {}, 1 << 20);
  auto est = estimate_probability(net, bare(4), *event, {}, 20000, 11);
  CHECK(est.radius == doctest::Approx(std::sqrt(std::log(2.0 / 0.05) / (2.0 * 20000))));
  CHECK(std::fabs(est.estimate - exact) <= est.radius);

  auto top = parse_formula("top", net.sigma());
  CHECK(estimate_probability(net, bare(4), *top, {}, 50, 1).estimate == 1.0);
  auto bot = parse_formula("bot", net.sigma());
  CHECK(estimate_probability(net, bare(4), *bot, {}, 50, 1).estimate == 0.0);

  auto frac = parse_formula("0.5", net.sigma());
  CHECK_THROWS_WITH_AS(estimate_probability(net, bare(4), *frac, {}, 10, 1),
                       doctest::Contains("0/1"), UserError);
}

TEST_CASE("parallel estimation matches the sequential result") {
  PlaNetwork net = unary_net(0.3);
  auto event = parse_formula("exists x . R(x)", net.sigma());
  auto seq1 = estimate_probability(net, bare(4), *event, {}, 4000, 5, 0.95, 1);
  auto par4 = estimate_probability(net, bare(4), *event, {}, 4000, 5, 0.95, 4);
  CHECK(seq1.estimate == par4.estimate);
}

TEST_CASE("sampler and enumerator agree across an event battery") {
  PlaNetwork net = parse_network("sigma E/2 R/1 | tau=1\nprob R(x): 0.5\n");
  Structure base = BaseSequence::path().generate(3);
  const char* events[] = {"exists x . R(x)", "forall x . R(x)",
                          "exists x y . and(E(x, y), R(y))",
                          "forall x . implies(R(x), exists y . E(x, y))"};
  int within = 0, total = 0;
  for (const char* text : events) {
    auto f = parse_formula(text, net.sigma());
    double exact = exact_probability(net, base, *f, {}, 1 << 20);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto est = estimate_probability(net, base, *f, {}, 2000, seed);
      ++total;
      within += std::fabs(est.estimate - exact) <= est.radius;
    }
  }
  // Hoeffding radii at 95% are conservative; near-exact coverage is expected
  CHECK(within >= total - 1);
}

TEST_CASE("marginal law: tuple frequencies follow theta on the lower stratum") {
  PlaNetwork net = parse_network(
      "sigma E/2 R/1 Q/1 | tau=1\n"
      "prob R(x): 0.4\n"
      "prob Q(x): and(R(x), 0.9)\n");
  Structure base = BaseSequence::path().generate(6);
  int trials = 3000;
  int q_given_r = 0, r_count = 0;
  for (int i = 0; i < trials; ++i) {
    World w = sample_world(net, base, 1000 + i);
    for (Element a = 0; a < w.structure.domain_size(); ++a) {
      if (!w.structure.holds(1, {a})) continue;
      ++r_count;
      q_given_r += w.structure.holds(2, {a});
    }
  }
  double freq = static_cast<double>(q_given_r) / r_count;
  CHECK(freq == doctest::Approx(0.9).epsilon(0.05));
}

TEST_CASE("reduct evaluation identity for theta") {
  PlaNetwork net = parse_network(
      "sigma E/2 R/1 Q/1 | tau=1\n"
      "prob R(x): am[E(x, y) : y : top]\n"
      "prob Q(x): R(x)\n");
  Structure base = BaseSequence::path().generate(5);
  World w = sample_world(net, base, 3);
  // theta_Q uses only R; evaluating on the (R u tau)-reduct is identical
  Structure reduced = w.structure.reduct(2);
  const Formula& theta = *net.theta(2);
  for (Element a = 0; a < base.domain_size(); ++a) {
    Assignment at{{net.arg_names(2)[0], a}};
    CHECK(evaluate(w.structure, theta, at) == evaluate(reduced, theta, at));
  }
}

TEST_CASE("subnetwork") {
  PlaNetwork net = parse_network(
      "sigma E/2 R/1 Q/1 S/1 | tau=1\n"
      "prob R(x): 0.5\n"
      "prob Q(x): R(x)\n"
      "prob S(x): Q(x)\n");
  CHECK(net.mp_rank() == 2);

  auto full = net.subnetwork({0, 1, 2, 3});
  CHECK(serialize_network(full) == serialize_network(net));

  auto tau_only = net.subnetwork({0});
  CHECK(tau_only.mp_rank() == -1);

  auto below_top = net.stratum_subnetwork(net.mp_rank() - 1);
  CHECK(below_top.sigma().size() == 3);
  CHECK(below_top.mp_rank() == 1);

  CHECK_THROWS_WITH_AS(net.subnetwork({0, 3}), doctest::Contains("parent"),
                       UserError);
  CHECK_THROWS_AS(net.subnetwork({1, 2}), UserError);
}
