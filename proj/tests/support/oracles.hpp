#ifndef PLASTAR_TESTS_ORACLES_HPP
#define PLASTAR_TESTS_ORACLES_HPP

// Test-only oracles, independent of the library's evaluation and
// canonicalization paths: a brute-force first-order model checker, a
// brute-force anchored-isomorphism search, and deterministic random
// structure / formula generators.

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "plastar/formula.hpp"
#include "plastar/structure.hpp"

namespace plastar::testing {

// --- first-order oracle -----------------------------------------------------

struct FoFormula;
using FoPtr = std::shared_ptr<const FoFormula>;

struct FoFormula {
  enum Kind { Atom, Eq, Not, And, Or, Exists, Forall } kind;
  std::string symbol;              // Atom
  std::vector<std::string> vars;   // Atom args; quantifier variable in vars[0]
  std::vector<FoPtr> subs;

  static FoPtr atom(std::string s, std::vector<std::string> vs) {
    return std::make_shared<FoFormula>(FoFormula{Atom, std::move(s), std::move(vs), {}});
  }
  static FoPtr eq(std::string x, std::string y) {
    return std::make_shared<FoFormula>(FoFormula{Eq, "", {std::move(x), std::move(y)}, {}});
  }
  static FoPtr lnot(FoPtr f) {
    return std::make_shared<FoFormula>(FoFormula{Not, "", {}, {std::move(f)}});
  }
  static FoPtr land(FoPtr a, FoPtr b) {
    return std::make_shared<FoFormula>(FoFormula{And, "", {}, {std::move(a), std::move(b)}});
  }
  static FoPtr lor(FoPtr a, FoPtr b) {
    return std::make_shared<FoFormula>(FoFormula{Or, "", {}, {std::move(a), std::move(b)}});
  }
  static FoPtr exists(std::string v, FoPtr f) {
    return std::make_shared<FoFormula>(FoFormula{Exists, "", {std::move(v)}, {std::move(f)}});
  }
  static FoPtr forall(std::string v, FoPtr f) {
    return std::make_shared<FoFormula>(FoFormula{Forall, "", {std::move(v)}, {std::move(f)}});
  }
};

inline bool fo_holds(const Structure& s, const FoFormula& f,
                     std::map<std::string, Element>& env) {
  switch (f.kind) {
    case FoFormula::Atom: {
      Tuple t;
      for (const auto& v : f.vars) t.push_back(env.at(v));
      return s.holds(*s.signature().index_of(f.symbol), t);
    }
    case FoFormula::Eq:
      return env.at(f.vars[0]) == env.at(f.vars[1]);
    case FoFormula::Not:
      return !fo_holds(s, *f.subs[0], env);
    case FoFormula::And:
      return fo_holds(s, *f.subs[0], env) && fo_holds(s, *f.subs[1], env);
    case FoFormula::Or:
      return fo_holds(s, *f.subs[0], env) || fo_holds(s, *f.subs[1], env);
    case FoFormula::Exists: {
      for (Element a = 0; a < s.domain_size(); ++a) {
        env[f.vars[0]] = a;
        if (fo_holds(s, *f.subs[0], env)) {
          env.erase(f.vars[0]);
          return true;
        }
      }
      env.erase(f.vars[0]);
      return false;
    }
    case FoFormula::Forall: {
      for (Element a = 0; a < s.domain_size(); ++a) {
        env[f.vars[0]] = a;
        if (!fo_holds(s, *f.subs[0], env)) {
          env.erase(f.vars[0]);
          return false;
        }
      }
      env.erase(f.vars[0]);
      return true;
    }
  }
  return false;
}

// --- anchored isomorphism oracle ---------------------------------------------

// Exhaustive search for an isomorphism between the induced substructures on
// set_a / set_b mapping anchors pointwise and rare marks onto rare marks.
inline bool anchored_isomorphic(const Structure& sa, const std::vector<Element>& set_a,
                                const Tuple& anchors_a,
                                const std::vector<Element>& rare_a,
                                const Structure& sb, const std::vector<Element>& set_b,
                                const Tuple& anchors_b,
                                const std::vector<Element>& rare_b) {
  if (sa.signature() != sb.signature()) return false;
  if (set_a.size() != set_b.size()) return false;
  if (anchors_a.size() != anchors_b.size()) return false;

  auto sub_a = sa.induced_substructure(set_a);
  auto sub_b = sb.induced_substructure(set_b);
  const int m = sub_a.structure.domain_size();
  if (sub_b.structure.domain_size() != m) return false;

  std::vector<bool> rare_flag_a(m, false), rare_flag_b(m, false);
  for (Element r : rare_a)
    if (sub_a.new_of_old[r] >= 0) rare_flag_a[sub_a.new_of_old[r]] = true;
  for (Element r : rare_b)
    if (sub_b.new_of_old[r] >= 0) rare_flag_b[sub_b.new_of_old[r]] = true;

  std::vector<Element> image(m, -1);
  std::vector<bool> used(m, false);
  for (size_t i = 0; i < anchors_a.size(); ++i) {
    Element la = sub_a.new_of_old[anchors_a[i]];
    Element lb = sub_b.new_of_old[anchors_b[i]];
    if (la < 0 || lb < 0) return false;
    if (image[la] >= 0 && image[la] != lb) return false;
    if (image[la] < 0 && used[lb]) return false;
    image[la] = lb;
    used[lb] = true;
  }

  std::vector<Element> free_elems;
  for (Element e = 0; e < m; ++e)
    if (image[e] < 0) free_elems.push_back(e);
  std::vector<Element> targets;
  for (Element e = 0; e < m; ++e)
    if (!used[e]) targets.push_back(e);

  auto respects = [&](const std::vector<Element>& img) {
    for (Element e = 0; e < m; ++e)
      if (rare_flag_a[e] != rare_flag_b[img[e]]) return false;
    for (int r = 0; r < sa.signature().size(); ++r) {
      if (sub_a.structure.facts(r).size() != sub_b.structure.facts(r).size())
        return false;
      for (const Tuple& t : sub_a.structure.facts(r)) {
        Tuple mapped;
        for (Element e : t) mapped.push_back(img[e]);
        if (!sub_b.structure.holds(r, mapped)) return false;
      }
    }
    return true;
  };

  std::sort(targets.begin(), targets.end());
  do {
    std::vector<Element> img(image);
    for (size_t i = 0; i < free_elems.size(); ++i) img[free_elems[i]] = targets[i];
    if (respects(img)) return true;
  } while (std::next_permutation(targets.begin(), targets.end()));
  return free_elems.empty() && respects(image);
}

// --- deterministic random generators -----------------------------------------

struct TestRng {
  std::uint64_t state;
  explicit TestRng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() { return state = mix64(state + 0x9e3779b97f4a7c15ULL); }
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
  double unit() { return unit_uniform(next()); }
};

// Random structure over two unary symbols and one binary symbol
// (sigma = tau, so every relation is part of the base diagram).
inline Structure random_structure(TestRng& rng, int max_domain = 6) {
  Signature sig({{"P", 1}, {"Q", 1}, {"E", 2}}, 3);
  int n = 1 + rng.below(max_domain);
  std::vector<std::vector<Tuple>> facts(3);
  for (Element a = 0; a < n; ++a) {
    if (rng.unit() < 0.5) facts[0].push_back({a});
    if (rng.unit() < 0.5) facts[1].push_back({a});
    for (Element b = 0; b < n; ++b)
      if (rng.unit() < 0.3) facts[2].push_back({a, b});
  }
  return Structure(sig, n, std::move(facts));
}

// Random aggregation-free formula over {P, Q, E} with free variables from
// `vars`, depth-bounded.
inline FormulaPtr random_aggregation_free(TestRng& rng,
                                          const std::vector<std::string>& vars,
                                          int depth = 3) {
  const auto& conns = ConnectiveRegistry::builtins();
  auto var = [&] { return vars[rng.below(static_cast<int>(vars.size()))]; };
  if (depth == 0 || rng.unit() < 0.3) {
    switch (rng.below(5)) {
      case 0: return Formula::atom("P", {var()});
      case 1: return Formula::atom("Q", {var()});
      case 2: return Formula::atom("E", {var(), var()});
      case 3: return Formula::eq(var(), var());
      default: return Formula::constant(rng.below(5) / 4.0);
    }
  }
  switch (rng.below(4)) {
    case 0:
      return Formula::connective(conns.lookup("not", 1),
                                 {random_aggregation_free(rng, vars, depth - 1)});
    case 1:
      return Formula::connective(conns.lookup("and", 2),
                                 {random_aggregation_free(rng, vars, depth - 1),
                                  random_aggregation_free(rng, vars, depth - 1)});
    case 2:
      return Formula::connective(conns.lookup("or", 2),
                                 {random_aggregation_free(rng, vars, depth - 1),
                                  random_aggregation_free(rng, vars, depth - 1)});
    default:
      return Formula::connective(conns.lookup("implies", 2),
                                 {random_aggregation_free(rng, vars, depth - 1),
                                  random_aggregation_free(rng, vars, depth - 1)});
  }
}

}  // namespace plastar::testing

#endif  // PLASTAR_TESTS_ORACLES_HPP
