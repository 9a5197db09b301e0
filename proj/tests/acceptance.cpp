// Acceptance suite: every criterion runs at its pinned tolerance and prints
// one PASS/FAIL line. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "plastar/elimination.hpp"
#include "support/oracles.hpp"

using namespace plastar;
using plastar::testing::TestRng;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::vector<std::pair<std::string, std::function<Outcome()>>> g_criteria;

void fail(Outcome& o, const std::string& why) {
  o.pass = false;
  o.detail += (o.detail.empty() ? "" : "; ") + why;
}

// 1. The four Lukasiewicz connectives restricted to {0,1} reproduce the
//    classical truth tables: 16 entries, exact.
Outcome classical_embedding() {
  Outcome o;
  const auto& reg = ConnectiveRegistry::builtins();
  auto ev = [&](const char* name, std::vector<double> args) {
    return reg.lookup(name, static_cast<int>(args.size()))->fn(args);
  };
  int entries = 0;
  auto expect = [&](double got, double want, const std::string& what) {
    ++entries;
    if (got != want) fail(o, what + " gave " + format_double(got));
  };
  for (int a = 0; a <= 1; ++a) {
    expect(ev("not", {double(a)}), a ? 0.0 : 1.0, "not(" + std::to_string(a) + ")");
    for (int b = 0; b <= 1; ++b) {
      std::string ab = std::to_string(a) + "," + std::to_string(b);
      expect(ev("and", {double(a), double(b)}), a && b ? 1.0 : 0.0, "and(" + ab + ")");
      expect(ev("or", {double(a), double(b)}), a || b ? 1.0 : 0.0, "or(" + ab + ")");
      expect(ev("implies", {double(a), double(b)}), !a || b ? 1.0 : 0.0,
             "implies(" + ab + ")");
    }
  }
  expect(evaluate(Structure(Signature({}, 0), 1), *Formula::top(), {}), 1.0, "top");
  expect(evaluate(Structure(Signature({}, 0), 1), *Formula::bottom(), {}), 0.0, "bot");
  o.detail = std::to_string(entries) + "/16 classical entries exact";
  if (entries != 16) fail(o, "entry count off");
  return o;
}

// 2. 200 random aggregation-free formulas over 2 unary + 1 binary symbols,
//    50 random structures with |domain| <= 6: compiled-basic evaluation
//    equals direct evaluation within 1e-12 at every tuple.
Outcome aggregation_free_exactness() {
  Outcome o;
  TestRng rng(20251);
  std::vector<Structure> structures;
  for (int i = 0; i < 50; ++i)
    structures.push_back(plastar::testing::random_structure(rng, 6));

  const std::vector<std::string> vars{"x", "y"};
  CanonOptions canon;
  auto no_rare = [](int) { return std::vector<Element>{}; };
  std::uint64_t tuples_checked = 0;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    FormulaPtr f = plastar::testing::random_aggregation_free(rng, vars, 3);

    // compile: realized complete (sigma,0)-closure types across the
    // structures, each mapped to the formula's (type-determined) value
    std::map<std::string, BasicCase> cases;
    for (const auto& s : structures)
      for (Element a = 0; a < s.domain_size(); ++a)
        for (Element b = 0; b < s.domain_size(); ++b) {
          CertPtr t = certificate_of(s, {a, b}, 0, TypeCertificate::Kind::Closure,
                                     3, {}, canon);
          if (!cases.count(t->bytes))
            cases.emplace(t->bytes,
                          BasicCase{t, evaluate(s, *f, {{"x", a}, {"y", b}}), true});
        }
    std::vector<BasicCase> case_list;
    for (auto& [bytes, c] : cases) case_list.push_back(c);
    BasicFormula basic(0, std::move(case_list));

    for (const auto& s : structures)
      for (Element a = 0; a < s.domain_size(); ++a)
        for (Element b = 0; b < s.domain_size(); ++b) {
          double direct = evaluate(s, *f, {{"x", a}, {"y", b}});
          double compiled = basic.evaluate(s, no_rare, canon, {a, b});
          worst = std::max(worst, std::fabs(direct - compiled));
          ++tuples_checked;
        }
  }
  o.detail = std::to_string(tuples_checked) + " tuples, max deviation " +
             format_double(worst);
  if (worst > 1e-12) fail(o, "deviation above 1e-12");
  return o;
}

// 3. rare_elements on the path equals {0..lambda-1} u {n-lambda+1..n}.
Outcome rare_closed_form() {
  Outcome o;
  Config cfg;
  TypeContext ctx(BaseSequence::path(), cfg);
  for (auto [n, lambda] : std::vector<std::pair<int, int>>{{100, 3}, {257, 5}, {512, 1}}) {
    std::vector<Element> expected;
    for (Element a = 0; a < lambda; ++a) expected.push_back(a);
    for (Element a = n - lambda + 1; a <= n; ++a) expected.push_back(a);
    if (ctx.rare_elements(n, lambda) != expected) {
      fail(o, "mismatch at (n=" + std::to_string(n) +
                  ", lambda=" + std::to_string(lambda) + ")");
    }
  }
  if (o.pass) o.detail = "closed form exact at (100,3), (257,5), (512,1)";
  return o;
}

// 4. n=4, one unary R with theta = 0.5: 16 worlds summing to 1 +- 1e-9,
//    P(exists x R(x)) = 15/16 exactly; the Hoeffding estimate covers the
//    exact value in at least 95 of 100 seeded trials.
Outcome distribution_oracle() {
  Outcome o;
  PlaNetwork net = parse_network("sigma R/1 | tau=0\nprob R(x): 0.5\n");
  Structure base = BaseSequence::empty_set().generate(4);

  int worlds = 0;
  double total = 0;
  for_each_world(net, base, 1 << 24, [&](const Structure&, double p) {
    ++worlds;
    total += p;
  });
  if (worlds != 16) fail(o, "expected 16 worlds, got " + std::to_string(worlds));
  if (std::fabs(total - 1.0) > 1e-9) fail(o, "probabilities sum to " + format_double(total));

  auto event = parse_formula("exists x . R(x)", net.sigma());
  double exact = exact_probability(net, base, *event, {}, 1 << 24);
  if (exact != 15.0 / 16) fail(o, "exact probability " + format_double(exact));

  int covered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto est = estimate_probability(net, base, *event, {}, 100000, seed, 0.95, 4);
    if (std::fabs(est.estimate - exact) <= est.radius) ++covered;
  }
  o.detail = "sum=" + format_double(total) + ", exact=15/16, coverage " +
             std::to_string(covered) + "/100";
  if (covered < 95) fail(o, "coverage below 95");
  return o;
}

// 5. ct-limit oracle: am -> 0.5 within 1e-6, max -> 0.8 exactly, and the
//    (c, alpha) pairs can be permuted freely.
Outcome ct_limit_oracle() {
  Outcome o;
  const auto& reg = AggregationRegistry::builtins();
  CtParameters params{{{{0.2, 0.5}, {0.8, 0.5}}}};
  CtParameters flipped{{{{0.8, 0.5}, {0.2, 0.5}}}};
  auto am = ct_limit(*reg.lookup("am"), params, 1e-7);
  if (std::fabs(am.value - 0.5) > 1e-6)
    fail(o, "am limit " + format_double(am.value));
  auto mx = ct_limit(*reg.lookup("max"), params, 1e-7);
  if (mx.value != 0.8) fail(o, "max limit " + format_double(mx.value));
  auto am2 = ct_limit(*reg.lookup("am"), flipped, 1e-7);
  auto mx2 = ct_limit(*reg.lookup("max"), flipped, 1e-7);
  if (std::fabs(am.value - am2.value) > 1e-9 || mx.value != mx2.value)
    fail(o, "reordering the pairs changed a limit");
  o.detail = "am=" + format_double(am.value) + ", max=" + format_double(mx.value) +
             ", reorder invariant";
  return o;
}

// 6. Exact bounded balance on the path: p2 = adjacency (y-bounded), p1 adds
//    R(y); the counted ratio is an exact rational, constant across all
//    q-satisfying anchors at every probe in {64, 128, 256}.
Outcome bounded_balance() {
  Outcome o;
  Config cfg;
  cfg.probes = {64, 128, 256};
  cfg.worlds_per_probe = 3;
  cfg.seed = 17;
  TypeContext ctx(BaseSequence::path(), cfg);
  PlaNetwork net = parse_network("sigma E/2 R/1 | tau=1\nprob R(x): 0.5\n");
  Compiler comp(ctx, net);
  TypedFormula p2{parse_formula("or(E(x, y), E(y, x))", net.sigma()), {"x", "y"}, 1};
  TypedFormula p1{parse_formula("and(or(E(x, y), E(y, x)), R(y))", net.sigma()),
                  {"x", "y"}, 1};
  try {
    // the constancy assertion runs inside: any violation raises InternalError
    auto balances = comp.balance_exact_bounded(p1, p2);
    int nontrivial = 0;
    for (const auto& e : balances) {
      if (!e.exact_bounded) fail(o, "non-exact mode at q=" + e.q_id);
      double ratio = e.denom ? double(e.numer) / e.denom : 0.0;
      if (e.alpha != ratio) fail(o, "alpha is not the exact rational");
      if (e.alpha != 0.0 && e.alpha != 0.5 && e.alpha != 1.0)
        fail(o, "alpha outside {0, 1/2, 1}: " + format_double(e.alpha));
      if (e.denom > 0) ++nontrivial;
    }
    o.detail = std::to_string(balances.size()) + " conditioning types, " +
               std::to_string(nontrivial) +
               " with realizations, all ratios exact and constant";
    if (nontrivial < 3) fail(o, "too few realized conditioning types");
  } catch (const InternalError& e) {
    fail(o, std::string("constancy assertion failed: ") + e.what());
  }
  return o;
}

// 7. End-to-end elimination of am over the strongly unbounded generic
//    (tau,0)-type with theta_R = 0.3: every compiled constant in
//    [0.28, 0.32]; the equivalence check at eps = 0.05, n = 512, 200 worlds
//    reports a deviation fraction <= 0.05 and the perturbed negative control
//    reports >= 0.9.
Outcome end_to_end_elimination() {
  Outcome o;
  PlaNetwork net = parse_network("sigma E/2 R/1 | tau=1\nprob R(x): 0.3\n");
  auto phi = parse_formula(
      "am[R(y) : y : and(not(x = y), and(not(E(x, y)), not(E(y, x))))]",
      net.sigma());

  Config compile_cfg;
  compile_cfg.probes = {64, 128, 256};
  compile_cfg.worlds_per_probe = 3;
  compile_cfg.max_anchors = 24;
  compile_cfg.seed = 7;
  TypeContext compile_ctx(BaseSequence::path(), compile_cfg);
  Compiler compiler(compile_ctx, net);
  auto [basic, report] = compiler.compile(phi);

  std::string constants;
  for (const auto& c : basic.cases()) {
    constants += (constants.empty() ? "" : ",") + format_double(c.value);
    if (c.value < 0.28 || c.value > 0.32)
      fail(o, "case constant " + format_double(c.value) + " outside [0.28, 0.32]");
  }

  Config check_cfg;
  check_cfg.probes = {512};
  check_cfg.samples = 200;
  check_cfg.seed = 7;
  TypeContext check_ctx(BaseSequence::path(), check_cfg);
  Compiler checker(check_ctx, net);
  auto rep = checker.check_asymptotic_equivalence(phi, basic, 0.05);
  double fraction = rep.deviation_fraction.back();
  if (fraction > 0.05)
    fail(o, "deviation fraction " + format_double(fraction) + " above 0.05");

  std::vector<BasicCase> wrong;
  for (const auto& c : basic.cases())
    wrong.push_back({c.type, std::min(1.0, c.value + 0.3), false});
  BasicFormula perturbed(basic.level(), std::move(wrong));
  auto neg = checker.check_asymptotic_equivalence(phi, perturbed, 0.05);
  double neg_fraction = neg.deviation_fraction.back();
  if (neg_fraction < 0.9)
    fail(o, "negative control fraction " + format_double(neg_fraction) + " below 0.9");

  o.detail = "constants {" + constants + "}, deviation " + format_double(fraction) +
             ", negative control " + format_double(neg_fraction);
  return o;
}

// 8. Convergent pair (interior type & R(x), interior type): the conditional
//    probability is 0.3 within the estimator radius at n in {64,...,512} and
//    exactly 0.3 under exact enumeration at n <= 8.
Outcome convergence_stabilization() {
  Outcome o;
  PlaNetwork net = parse_network("sigma E/2 R/1 | tau=1\nprob R(x): 0.3\n");

  {  // exact enumeration at small n
    Config cfg;
    cfg.probes = {4, 8};
    TypeContext ctx(BaseSequence::path(), cfg);
    Compiler comp(ctx, net);
    auto b = ctx.base(8);
    CertPtr p_tau = ctx.closure_type(*b, 8, {4}, 1, 1);
    auto p = Formula::connective(
        ConnectiveRegistry::builtins().lookup("and", 2),
        {Formula::type_atom(p_tau, {"v0"}), Formula::atom("R", {"v0"})});
    auto est = comp.convergence_estimate(p, {"v0"}, *p_tau);
    for (size_t i = 0; i < est.per_probe.size(); ++i) {
      if (!est.valid[i]) continue;
      if (!est.exact[i]) fail(o, "small probe was not enumerated exactly");
      if (std::fabs(est.per_probe[i] - 0.3) > 1e-12)
        fail(o, "exact value " + format_double(est.per_probe[i]) + " at n=" +
                    std::to_string(est.probe_sizes[i]));
    }
  }

  {  // sampled estimates at the large probes
    Config cfg;
    cfg.probes = {64, 128, 256, 512};
    cfg.samples = 600;
    cfg.seed = 23;
    TypeContext ctx(BaseSequence::path(), cfg);
    Compiler comp(ctx, net);
    auto b = ctx.base(64);
    CertPtr p_tau = ctx.closure_type(*b, 64, {32}, 1, 1);
    auto p = Formula::connective(
        ConnectiveRegistry::builtins().lookup("and", 2),
        {Formula::type_atom(p_tau, {"v0"}), Formula::atom("R", {"v0"})});
    auto est = comp.convergence_estimate(p, {"v0"}, *p_tau);
    double radius = std::sqrt(std::log(2.0 / 0.05) / (2.0 * cfg.samples));
    std::string probes_detail;
    for (size_t i = 0; i < est.per_probe.size(); ++i) {
      if (!est.valid[i]) {
        fail(o, "tau-type unrealized at n=" + std::to_string(est.probe_sizes[i]));
        continue;
      }
      probes_detail += (probes_detail.empty() ? "" : ",") +
                       format_double(est.per_probe[i]);
      if (std::fabs(est.per_probe[i] - 0.3) > radius)
        fail(o, "estimate " + format_double(est.per_probe[i]) + " at n=" +
                    std::to_string(est.probe_sizes[i]) + " outside radius " +
                    format_double(radius));
    }
    o.detail = "exact 0.3 at n<=8; sampled {" + probes_detail + "} within +-" +
               format_double(radius);
  }
  return o;
}

// 9. Certificate equality coincides with brute-force anchored isomorphism on
//    every anchored pair over 30 random structures with |domain| <= 6.
Outcome canonicalization_oracle() {
  Outcome o;
  TestRng rng(909);
  std::vector<Structure> structures;
  for (int i = 0; i < 30; ++i)
    structures.push_back(plastar::testing::random_structure(rng, 6));

  std::uint64_t pairs = 0, mismatches = 0;
  auto check_arity = [&](int arity, int lambda) {
    std::vector<std::pair<const Structure*, Tuple>> anchored;
    for (const auto& s : structures) {
      if (arity == 1) {
        for (Element a = 0; a < s.domain_size(); ++a) anchored.push_back({&s, {a}});
      } else {
        for (Element a = 0; a < s.domain_size(); ++a)
          for (Element b = 0; b < s.domain_size(); ++b)
            anchored.push_back({&s, {a, b}});
      }
    }
    std::vector<CertPtr> certs;
    certs.reserve(anchored.size());
    for (const auto& [s, t] : anchored)
      certs.push_back(certificate_of(*s, t, lambda,
                                     TypeCertificate::Kind::Neighbourhood, 3));
    for (size_t i = 0; i < anchored.size(); ++i)
      for (size_t j = i; j < anchored.size(); ++j) {
        bool cert_eq = certs[i]->bytes == certs[j]->bytes;
        bool iso = plastar::testing::anchored_isomorphic(
            *anchored[i].first,
            anchored[i].first->neighbourhood(anchored[i].second, lambda),
            anchored[i].second, {}, *anchored[j].first,
            anchored[j].first->neighbourhood(anchored[j].second, lambda),
            anchored[j].second, {});
        ++pairs;
        if (cert_eq != iso) ++mismatches;
      }
  };
  check_arity(1, 0);
  check_arity(1, 1);
  check_arity(1, 2);
  check_arity(2, 1);
  o.detail = std::to_string(pairs) + " anchored pairs, " +
             std::to_string(mismatches) + " disagreements";
  if (mismatches > 0) fail(o, "certificate equality diverged from the oracle");
  return o;
}

// 10. The relative-frequency diagnostic on the path reports exactly
//     (n-3)/(n-1) per probe for the radius-2 refinement of the interior
//     radius-1 type, and flags stabilization.
Outcome ratio_diagnostic_sanity() {
  Outcome o;
  BaseSequence seq = BaseSequence::path();
  std::vector<int> probes{32, 64, 128, 256, 512};
  Structure b = seq.generate(32);
  auto r = certificate_of(b, {16}, 2, TypeCertificate::Kind::Neighbourhood, 1);
  auto p = certificate_of(b, {16}, 1, TypeCertificate::Kind::Neighbourhood, 1);
  auto d = ratio_diagnostic(seq, *r, *p, probes);
  std::string values;
  for (size_t i = 0; i < d.ratios.size(); ++i) {
    double n = probes[i];
    double expected = (n - 3) / (n - 1);
    values += (values.empty() ? "" : ",") + format_double(d.ratios[i]);
    if (!d.valid[i] || d.ratios[i] != expected)
      fail(o, "ratio at n=" + std::to_string(probes[i]) + " is " +
                  format_double(d.ratios[i]) + ", expected " +
                  format_double(expected));
  }
  if (!d.stabilized) fail(o, "stabilization flag not set");
  o.detail = "ratios {" + values + "}, stabilized";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  g_criteria = {
      {"classical-logic embedding", classical_embedding},
      {"aggregation-free compilation exactness", aggregation_free_exactness},
      {"rare-element closed form", rare_closed_form},
      {"distribution oracle", distribution_oracle},
      {"ct-limit oracle", ct_limit_oracle},
      {"bounded-balance exactness", bounded_balance},
      {"end-to-end elimination", end_to_end_elimination},
      {"convergence stabilization", convergence_stabilization},
      {"canonicalization oracle", canonicalization_oracle},
      {"ratio diagnostic sanity", ratio_diagnostic_sanity},
  };

  int only = -1;
  if (argc > 1) only = std::atoi(argv[1]);

  int failures = 0;
  for (size_t i = 0; i < g_criteria.size(); ++i) {
    if (only > 0 && static_cast<int>(i) + 1 != only) continue;
    const auto& [name, fn] = g_criteria[i];
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start).count();
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " ["
         << name << "] (" << std::fixed;
    line.precision(1);
    line << secs << "s)";
    if (!o.detail.empty()) line << ": " << o.detail;
    std::cout << line.str() << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures;
}
