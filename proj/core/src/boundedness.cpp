#include "plastar/boundedness.hpp"

#include <algorithm>
#include <cmath>

namespace plastar {

namespace {

// Scans all |anchor_arity|-tuples of s, counting certificate matches.
// Returns the first realizing tuple through `witness` when found.
std::uint64_t scan_realizations(const Structure& s, const TypeCertificate& t,
                                const std::vector<Element>& rare,
                                std::uint64_t tuple_budget,
                                const CanonOptions& canon,
                                std::optional<Tuple>* witness) {
  const int k = t.anchor_arity;
  const int n = s.domain_size();
  double total = std::pow(static_cast<double>(n), k);
  if (total > static_cast<double>(tuple_budget))
    throw BudgetError("realization scan of " + format_double(total) +
                      " tuples exceeds budget " + std::to_string(tuple_budget));
  if (n == 0 || k == 0) return 0;

  // anchor equality pattern of the certificate, as a cheap prefilter
  std::vector<std::pair<int, int>> eq, neq;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      (t.anchor_labels[i] == t.anchor_labels[j] ? eq : neq).emplace_back(i, j);

  std::uint64_t count = 0;
  Tuple b(k, 0);
  while (true) {
    bool pattern_ok = true;
    for (auto [i, j] : eq)
      if (b[i] != b[j]) {
        pattern_ok = false;
        break;
      }
    if (pattern_ok)
      for (auto [i, j] : neq)
        if (b[i] == b[j]) {
          pattern_ok = false;
          break;
        }
    if (pattern_ok) {
      CertPtr here = certificate_of(s, b, t.radius, t.kind,
                                    t.scope.size(), rare, canon);
      if (here->bytes == t.bytes) {
        ++count;
        if (witness && !witness->has_value()) *witness = b;
      }
    }
    int pos = k - 1;
    while (pos >= 0) {
      if (++b[pos] < n) break;
      b[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return count;
}

}  // namespace

std::uint64_t count_realizations_in(const Structure& s, const TypeCertificate& t,
                                    const std::vector<Element>& rare,
                                    std::uint64_t tuple_budget,
                                    const CanonOptions& canon) {
  return scan_realizations(s, t, rare, tuple_budget, canon, nullptr);
}

BoundednessVerdict classify_boundedness(const BaseSequence& seq,
                                        const TypeCertificate& t,
                                        const std::vector<int>& probes,
                                        std::uint64_t tuple_budget,
                                        const BaseProvider& base_provider) {
  if (t.kind != TypeCertificate::Kind::Neighbourhood)
    throw UserError("boundedness oracle takes neighbourhood types");
  if (t.scope.size() != t.scope.tau_prefix_len())
    throw UserError("boundedness oracle takes tau-scope types");
  if (probes.empty() || !std::is_sorted(probes.begin(), probes.end()))
    throw UserError("probes must be a nonempty increasing list");
  if (sim_partition(t).blocks.size() > 1)
    throw UserError("boundedness oracle requires all anchors in one ~p-class");

  BoundednessVerdict v;
  std::optional<Tuple> witness;
  int witness_probe = 0;
  for (int n : probes) {
    std::shared_ptr<const Structure> sp =
        base_provider ? base_provider(n)
                      : std::make_shared<const Structure>(seq.generate(n));
    const Structure& s = *sp;
    std::optional<Tuple> w;
    std::uint64_t c;
    if (seq.analytic_family()) {
      // evidence only: large scans do not block an analytic verdict, so stop
      // collecting counts once probes outgrow a small evidence budget
      double scan = std::pow(static_cast<double>(s.domain_size()), t.anchor_arity);
      if (scan > 2000 && witness) break;
      try {
        c = scan_realizations(s, t, {}, tuple_budget, {}, &w);
      } catch (const BudgetError&) {
        break;
      }
    } else {
      c = scan_realizations(s, t, {}, tuple_budget, {}, &w);
    }
    v.probe_sizes.push_back(n);
    v.counts.push_back(c);
    if (w) {  // prefer the largest probe's witness
      witness = w;
      witness_probe = n;
    }
  }

  bool all_zero = true;
  for (auto c : v.counts) all_zero &= c == 0;
  if (all_zero) {
    v.bounded = true;  // unsatisfied at every probe
    v.cap = 0;
    v.analytic = false;
    return v;
  }

  const int lambda = t.radius;
  switch (seq.family()) {
    case BaseSequence::Family::EmptySet:
      v.bounded = false;
      v.analytic = true;
      break;
    case BaseSequence::Family::UnaryRare: {
      // bounded iff the (single) class element carries some unary mark,
      // which the configuration records directly
      bool marked = false;
      for (int r = 0; r < t.scope.size(); ++r)
        if (!t.config.facts(r).empty()) marked = true;
      v.bounded = marked;
      v.analytic = true;
      break;
    }
    case BaseSequence::Family::Path: {
      // bounded iff the type forces fewer than lambda predecessors or
      // successors for some anchor (the lambda-window is truncated)
      const int n = witness_probe;
      bool truncated = false;
      for (Element a : *witness)
        if (a < lambda || n - a < lambda) truncated = true;
      v.bounded = truncated;
      v.analytic = true;
      break;
    }
    case BaseSequence::Family::Grid: {
      // bounded iff the type forces proximity to a corner
      bool near_corner = false;
      for (Element a : *witness)
        if (seq.grid_corner_distance(witness_probe, a) < lambda) near_corner = true;
      v.bounded = near_corner;
      v.analytic = true;
      break;
    }
    case BaseSequence::Family::BoundedTree: {
      int have = static_cast<int>(v.counts.size());
      int window = std::min(3, have);
      bool plateau = true;
      for (int i = have - window + 1; i < have; ++i)
        plateau &= v.counts[i] == v.counts[i - 1];
      v.bounded = plateau;
      v.analytic = false;
      break;
    }
  }
  if (v.bounded) {
    v.cap = 0;
    for (auto c : v.counts) v.cap = std::max(v.cap, c);
  }
  return v;
}

RatioDiagnostic ratio_diagnostic(const BaseSequence& seq, const TypeCertificate& r,
                                 const TypeCertificate& p,
                                 const std::vector<int>& probes,
                                 double stabilization_tol,
                                 std::uint64_t tuple_budget) {
  if (p.radius > r.radius)
    throw UserError("ratio diagnostic expects p = restrict_radius(r, lambda) with "
                    "lambda <= r's radius");
  if (p.anchor_arity != r.anchor_arity)
    throw UserError("ratio diagnostic types must share anchor arity");
  for (const auto& t : {&r, &p}) {
    if (sim_partition(*t).blocks.size() > 1)
      throw UserError("ratio diagnostic requires dimension-1 types");
    auto verdict = classify_boundedness(seq, *t, probes, tuple_budget);
    if (verdict.bounded)
      throw UserError("ratio diagnostic requires strongly unbounded types");
  }

  RatioDiagnostic out;
  bool restriction_checked = false;
  for (int n : probes) {
    Structure s = seq.generate(n);
    std::optional<Tuple> w;
    std::uint64_t cr = scan_realizations(s, r, {}, tuple_budget, {}, &w);
    std::uint64_t cp = count_realizations_in(s, p, {}, tuple_budget);
    if (w && !restriction_checked) {
      CertPtr restricted = certificate_of(s, *w, p.radius, p.kind, p.scope.size());
      if (restricted->bytes != p.bytes)
        throw UserError("p is not the radius restriction of r");
      restriction_checked = true;
    }
    out.probe_sizes.push_back(n);
    out.valid.push_back(cp > 0);
    out.ratios.push_back(cp > 0 ? static_cast<double>(cr) / static_cast<double>(cp)
                                : 0.0);
  }
  std::vector<double> tail;
  for (size_t i = 0; i < out.ratios.size(); ++i)
    if (out.valid[i]) tail.push_back(out.ratios[i]);
  if (tail.size() >= 3) {
    double lo = *std::min_element(tail.end() - 3, tail.end());
    double hi = *std::max_element(tail.end() - 3, tail.end());
    out.stabilized = hi - lo < stabilization_tol;
  }
  return out;
}

}  // namespace plastar
