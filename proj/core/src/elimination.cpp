#include "plastar/elimination.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace plastar {

namespace {

std::string short_id(const TypeCertificate& t) {
  std::uint64_t h = 0x51d;
  for (unsigned char c : t.bytes) h = hash_combine(h, c);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%012llx",
                static_cast<unsigned long long>(h & 0xffffffffffffULL));
  return buf;
}

// Visits the n^k anchor tuples in a seed-derived order so capped scans sample
// positions all over the structure instead of one corner of it.
class PermutedTuples {
 public:
  PermutedTuples(int n, int k, std::uint64_t seed) : n_(n), k_(k) {
    total_ = 1;
    for (int i = 0; i < k; ++i) total_ *= static_cast<std::uint64_t>(n);
    if (total_ == 0) total_ = 0;
    step_ = (mix64(seed) | 1);
    if (total_ > 0) {
      step_ %= total_;
      if (step_ == 0) step_ = 1;
      while (std::gcd(step_, total_) != 1) step_ = step_ % total_ + 1;
      start_ = mix64(seed + 1) % total_;
    }
  }

  std::uint64_t size() const { return total_; }

  Tuple at(std::uint64_t t) const {
    std::uint64_t rank = (start_ + t * step_) % total_;
    Tuple out(k_, 0);
    for (int i = k_ - 1; i >= 0; --i) {
      out[i] = static_cast<Element>(rank % n_);
      rank /= n_;
    }
    return out;
  }

 private:
  int n_, k_;
  std::uint64_t total_ = 0, step_ = 1, start_ = 0;
};

// Reusable evaluation state for tuple scans: the environment and the
// assignment vector are built once, values are overwritten per tuple.
class TupleEvaluator {
 public:
  TupleEvaluator(EvalEnv env, const std::vector<std::string>& vars)
      : env_(std::move(env)) {
    asg_.reserve(vars.size());
    for (const auto& v : vars) asg_.emplace_back(v, 0);
  }

  void set(size_t i, Element e) { asg_[i].second = e; }
  void set_prefix(const Tuple& t) {
    for (size_t i = 0; i < t.size(); ++i) asg_[i].second = t[i];
  }
  void set_suffix(size_t offset, const Tuple& t) {
    for (size_t i = 0; i < t.size(); ++i) asg_[offset + i].second = t[i];
  }
  double operator()(const Formula& f) { return evaluate_with(env_, f, asg_); }

 private:
  EvalEnv env_;
  Assignment asg_;
};

double hoeffding_radius(int n, double confidence) {
  if (n <= 0) return 1.0;
  return std::sqrt(std::log(2.0 / (1.0 - confidence)) / (2.0 * n));
}

int formula_radius(const Formula& f) {
  int r = 0;
  if (f.kind() == NodeKind::DistLeq) r = std::max(r, (f.dist_bound() + 1) / 2);
  if (f.kind() == NodeKind::TypeAtom) r = std::max(r, f.type()->radius);
  for (const auto& s : f.subs()) r = std::max(r, formula_radius(*s));
  for (const auto& s : f.values()) r = std::max(r, formula_radius(*s));
  for (const auto& s : f.conditions()) r = std::max(r, formula_radius(*s));
  return r;
}

void collect_symbol_names(const Formula& f, std::set<std::string>& out) {
  if (f.kind() == NodeKind::Atom) out.insert(f.symbol());
  if (f.kind() == NodeKind::TypeAtom)
    for (const auto& sym : f.type()->scope.symbols()) out.insert(sym.name);
  for (const auto& s : f.subs()) collect_symbol_names(*s, out);
  for (const auto& s : f.values()) collect_symbol_names(*s, out);
  for (const auto& s : f.conditions()) collect_symbol_names(*s, out);
}

bool tau_only_formula(const Formula& f, const Signature& sigma) {
  std::set<std::string> names;
  collect_symbol_names(f, names);
  for (const auto& name : names) {
    auto idx = sigma.index_of(name);
    if (!idx || *idx >= sigma.tau_prefix_len()) return false;
  }
  return true;
}

void for_each_tuple(int n, int arity, const std::function<bool(const Tuple&)>& fn) {
  if (n <= 0) {
    if (arity == 0) fn({});
    return;
  }
  Tuple t(arity, 0);
  while (true) {
    if (!fn(t)) return;
    int pos = arity - 1;
    while (pos >= 0) {
      if (++t[pos] < n) break;
      t[pos] = 0;
      --pos;
    }
    if (pos < 0) return;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ct-limit

CtLimitResult ct_limit(const AggregationFunction& f, const CtParameters& params,
                       double tolerance, std::uint64_t initial_length,
                       std::uint64_t length_cap) {
  if (static_cast<int>(params.inputs.size()) != f.arity)
    throw UserError("ct-limit: parameter count does not match the aggregation arity");
  for (const auto& points : params.inputs) {
    if (points.empty())
      throw UserError("ct-limit: every input needs at least one convergence point");
    double sum = 0;
    for (const auto& p : points) {
      if (p.proportion < 0) throw UserError("ct-limit: negative proportion");
      if (p.value < 0 || p.value > 1) throw UserError("ct-limit: point outside [0,1]");
      sum += p.proportion;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw UserError("ct-limit: proportions must sum to 1 (got " +
                      format_double(sum) + ")");
  }
  if (f.cls == AggregationClass::Neither)
    throw UserError("aggregation function '" + f.name +
                    "' is neither continuous nor admissible");
  if (f.cls == AggregationClass::Admissible)
    for (const auto& points : params.inputs)
      for (const auto& p : points)
        if (p.proportion == 0.0)
          throw UserError("ct-limit: admissible '" + f.name +
                          "' needs strictly positive proportions");

  auto build = [&](std::uint64_t n) {
    std::vector<std::vector<double>> seqs;
    for (const auto& points : params.inputs) {
      std::vector<double> seq;
      seq.reserve(n);
      std::uint64_t used = 0;
      for (const auto& p : points) {
        auto count = static_cast<std::uint64_t>(p.proportion * static_cast<double>(n));
        count = std::min(count, n - used);
        seq.insert(seq.end(), count, p.value);
        used += count;
      }
      // remainder to the largest proportion, ties to the smallest index
      size_t best = 0;
      for (size_t i = 1; i < points.size(); ++i)
        if (points[i].proportion > points[best].proportion) best = i;
      seq.insert(seq.end(), n - used, points[best].value);
      seqs.push_back(std::move(seq));
    }
    return seqs;
  };

  double prev = -1;
  bool have_prev = false;
  for (std::uint64_t n = initial_length; n <= length_cap; n *= 2) {
    double v = f.fn(build(n));
    if (have_prev && std::fabs(v - prev) < tolerance)
      return {v, std::fabs(v - prev), n};
    prev = v;
    have_prev = true;
  }
  throw BudgetError("ct-limit for '" + f.name +
                    "' did not stabilize within the length cap of " +
                    std::to_string(length_cap));
}

// ---------------------------------------------------------------------------
// Compiler

std::string CompileReport::to_string() const {
  std::string out = "# compile report: level=" + std::to_string(level) +
                    " exact=" + (all_exact ? "1" : "0") + "\n";
  for (const auto& l : lines) out += l + "\n";
  return out;
}

struct Compiler::ConditioningInfo {
  FormulaPtr formula;
  FormulaPtr tau_part;
  int lambda = 0;
  bool tau_only = true;
  bool satisfiable = false;
  bool y_bounded = true;
  bool strongly_unbounded = true;
  std::vector<RealizedType> tau_types;
};

Compiler::Compiler(TypeContext& ctx, const PlaNetwork& net) : ctx_(ctx), net_(net) {
  if (net_.sigma().prefix(net_.sigma().tau_prefix_len()) != ctx_.tau())
    throw UserError("network tau does not match the base sequence signature");
}

std::shared_ptr<const Structure> Compiler::world(int n, int index) {
  auto key = std::make_pair(n, index);
  auto it = world_cache_.find(key);
  if (it != world_cache_.end()) return it->second;
  std::uint64_t seed = hash_combine(hash_combine(ctx_.config().seed, 0xba5e),
                                    hash_combine(static_cast<std::uint64_t>(n),
                                                 static_cast<std::uint64_t>(index)));
  World w = sample_world(net_, *ctx_.base(n), seed, ctx_.config().tuple_budget);
  auto sp = std::make_shared<const Structure>(std::move(w.structure));
  world_cache_.emplace(key, sp);
  return sp;
}

double Compiler::eval_formula(const Structure& s, int n, const FormulaPtr& f,
                              const std::vector<std::string>& vars,
                              const Tuple& tuple) {
  Assignment at;
  at.reserve(vars.size());
  for (size_t i = 0; i < vars.size(); ++i) at.emplace_back(vars[i], tuple[i]);
  EvalEnv env = ctx_.env_for(s, n);
  return evaluate(env, *f, at);
}

std::vector<RealizedType> Compiler::realized_sigma_types(int lambda, int arity) {
  const PlaNetwork* net = net_.num_random_symbols() > 0 ? &net_ : nullptr;
  return ctx_.enumerate_realized_types(ctx_.config().probes, lambda, arity,
                                       net_.sigma().size(), net);
}

BasicFormula Compiler::compile_aggregation_free(
    const Formula& f, const std::vector<std::string>& vars) {
  if (!f.aggregation_free())
    throw UserError("compile_aggregation_free takes an aggregation-free formula");
  auto realized = realized_sigma_types(0, static_cast<int>(vars.size()));
  std::vector<BasicCase> cases;
  for (const auto& rt : realized) {
    BasicCase c;
    c.type = rt.cert;
    c.value = eval_formula(*rt.structure, rt.probe_n,
                           FormulaPtr(&f, [](const Formula*) {}), vars, rt.witness);
    c.exact = true;
    cases.push_back(std::move(c));
  }
  report_.note("aggregation-free: " + std::to_string(cases.size()) +
               " cases mode=exact");
  return BasicFormula(0, std::move(cases));
}

BasicFormula Compiler::compose_connective(const Connective& conn,
                                          const std::vector<BasicFormula>& inputs,
                                          const std::vector<std::string>& vars) {
  if (inputs.empty()) throw UserError("compose_connective needs inputs");
  int level = 0;
  bool exact = true;
  for (const auto& b : inputs) {
    level = std::max(level, b.level());
    exact = exact && b.all_exact();
  }
  auto realized = realized_sigma_types(level, static_cast<int>(vars.size()));
  std::vector<BasicCase> cases;
  for (const auto& rt : realized) {
    std::vector<double> args;
    for (const auto& b : inputs)
      args.push_back(b.evaluate(ctx_, *rt.structure, rt.probe_n, rt.witness));
    double v = conn.fn(args);
    if (v < -1e-9 || v > 1.0 + 1e-9)
      throw InternalError("connective left [0,1] during composition");
    BasicCase c;
    c.type = rt.cert;
    c.value = std::min(1.0, std::max(0.0, v));
    c.exact = exact;
    cases.push_back(std::move(c));
  }
  report_.note("connective " + conn.name + ": refined to level " +
               std::to_string(level) + ", " + std::to_string(cases.size()) +
               " cases mode=" + (exact ? "exact" : "empirical"));
  return BasicFormula(level, std::move(cases));
}

Compiler::ConditioningInfo Compiler::analyze_conditioning(
    const FormulaPtr& chi, const std::vector<std::string>& vars,
    const std::vector<std::string>& bound) {
  ConditioningInfo info;
  info.formula = chi;

  std::vector<FormulaPtr> conjuncts;
  std::function<void(const FormulaPtr&)> flatten = [&](const FormulaPtr& f) {
    if (f->kind() == NodeKind::Connective && f->conn()->name == "and") {
      for (const auto& s : f->subs()) flatten(s);
      return;
    }
    conjuncts.push_back(f);
  };
  flatten(chi);

  std::vector<FormulaPtr> tau_conjuncts;
  for (const auto& c : conjuncts) {
    const Formula* literal = c.get();
    if (literal->kind() == NodeKind::Connective && literal->conn()->name == "not" )
      literal = literal->subs()[0].get();
    switch (literal->kind()) {
      case NodeKind::Const:
        if (literal->const_value() == 1.0) continue;  // top conjunct
        throw UserError("conditioning formula contains a non-0/1 constant");
      case NodeKind::Eq:
        break;
      case NodeKind::DistLeq:
        info.lambda = std::max(info.lambda, literal->dist_bound());
        break;
      case NodeKind::Atom: {
        auto idx = net_.sigma().index_of(literal->symbol());
        if (!idx)
          throw UserError("conditioning formula uses unknown symbol " +
                          literal->symbol());
        if (*idx >= net_.sigma().tau_prefix_len()) {
          info.tau_only = false;
          tau_conjuncts.push_back(nullptr);  // marker: drop from tau part
          continue;
        }
        break;
      }
      case NodeKind::TypeAtom:
        info.lambda = std::max(info.lambda, literal->type()->radius);
        if (literal->type()->scope.size() > net_.sigma().tau_prefix_len()) {
          info.tau_only = false;
          tau_conjuncts.push_back(nullptr);
          continue;
        }
        break;
      default:
        throw UserError(
            "conditioning formula must be a conjunction of literals and "
            "closure-type atoms: offending part " + c->print());
    }
    tau_conjuncts.push_back(c);
  }
  std::vector<FormulaPtr> kept;
  for (const auto& c : tau_conjuncts)
    if (c) kept.push_back(c);
  if (kept.empty()) {
    info.tau_part = Formula::top();
  } else if (kept.size() == 1) {
    info.tau_part = kept[0];
  } else {
    info.tau_part = Formula::connective(
        ConnectiveRegistry::builtins().lookup("and", static_cast<int>(kept.size())),
        kept);
  }

  // realized complete (tau, lambda)-closure types consistent with the tau part
  std::vector<std::string> all_vars(vars);
  all_vars.insert(all_vars.end(), bound.begin(), bound.end());
  std::vector<int> y_positions;
  for (size_t i = vars.size(); i < all_vars.size(); ++i)
    y_positions.push_back(static_cast<int>(i));

  std::map<std::string, RealizedType> found;
  for (int n : ctx_.config().probes) {
    auto b = ctx_.base(n);
    double total = std::pow(static_cast<double>(b->domain_size()),
                            static_cast<double>(all_vars.size()));
    if (total > static_cast<double>(ctx_.config().tuple_budget))
      throw BudgetError("conditioning analysis scan exceeds the tuple budget");
    TupleEvaluator ev(ctx_.env_for(*b, n), all_vars);
    for_each_tuple(b->domain_size(), static_cast<int>(all_vars.size()),
                   [&](const Tuple& t) {
                     ev.set_prefix(t);
                     if (ev(*info.tau_part) == 1.0) {
                       CertPtr c = ctx_.closure_type(*b, n, t, info.lambda,
                                                     ctx_.tau().size());
                       if (!found.count(c->bytes)) {
                         RealizedType r;
                         r.cert = c;
                         r.probe_n = n;
                         r.witness = t;
                         r.structure = b;
                         ctx_.register_witness(c, r);
                         found.emplace(c->bytes, std::move(r));
                       }
                     }
                     return true;
                   });
  }
  for (auto& [bytes, r] : found) info.tau_types.push_back(r);
  info.satisfiable = !info.tau_types.empty();
  for (const auto& rt : info.tau_types) {
    Classification cls = ctx_.classify(*rt.cert, y_positions);
    info.y_bounded = info.y_bounded && cls.verdict == Verdict::Bounded;
    info.strongly_unbounded =
        info.strongly_unbounded && cls.verdict == Verdict::StronglyUnbounded;
  }
  if (!info.satisfiable) {
    info.y_bounded = true;
    info.strongly_unbounded = false;
  }
  return info;
}

BasicFormula Compiler::eliminate_aggregation(const Formula& node,
                                             const std::vector<std::string>& vars) {
  const auto& bound = node.bound_vars();
  std::vector<std::string> all_vars(vars);
  all_vars.insert(all_vars.end(), bound.begin(), bound.end());

  std::vector<BasicFormula> value_basics;
  for (const auto& v : node.values())
    value_basics.push_back(compile_node(v, all_vars));

  std::vector<ConditioningInfo> infos;
  for (const auto& c : node.conditions())
    infos.push_back(analyze_conditioning(c, vars, bound));

  const AggregationFunction& f = *node.agg();
  const int x_arity = static_cast<int>(vars.size());
  const int y_arity = static_cast<int>(bound.size());

  // unsatisfiable conditioning => the aggregation is 0 everywhere
  bool any_unsat = false;
  for (const auto& info : infos) any_unsat |= !info.satisfiable;
  if (any_unsat) {
    auto realized = realized_sigma_types(0, x_arity);
    std::vector<BasicCase> cases;
    for (const auto& rt : realized)
      cases.push_back({rt.cert, 0.0, true});
    report_.note("aggregation " + f.name +
                 ": conditioning unsatisfiable at all probes -> constant 0");
    return BasicFormula(0, std::move(cases));
  }

  bool all_bounded = true, any_bounded = false;
  int lambda_chi = 0;
  for (const auto& info : infos) {
    all_bounded &= info.y_bounded;
    any_bounded |= info.y_bounded;
    lambda_chi = std::max(lambda_chi, info.lambda);
  }

  if (all_bounded) {
    // the bounded-local exact path: every conditioning tuple lives inside a
    // fixed closure of the anchors, so the node is a local function of the
    // (sigma, xi)-closure type
    int val_level = 0;
    bool exact = true;
    for (const auto& b : value_basics) {
      val_level = std::max(val_level, b.level());
      exact = exact && b.all_exact();
    }
    const int total_arity = x_arity + y_arity;
    const int gamma_loc = (2 * lambda_chi + 1) * total_arity;
    const int xi = gamma_loc + std::max(val_level, lambda_chi);
    auto realized = realized_sigma_types(xi, x_arity);
    std::vector<BasicCase> cases;
    for (const auto& rt : realized) {
      const Structure& s = *rt.structure;
      std::vector<std::vector<double>> seqs(node.values().size());
      Tuple full(rt.witness);
      full.resize(all_vars.size());
      TupleEvaluator ev(ctx_.env_for(s, rt.probe_n), all_vars);
      ev.set_prefix(rt.witness);
      for_each_tuple(s.domain_size(), y_arity, [&](const Tuple& b) {
        for (int i = 0; i < y_arity; ++i) full[x_arity + i] = b[i];
        ev.set_suffix(x_arity, b);
        for (size_t i = 0; i < infos.size(); ++i)
          if (ev(*infos[i].formula) == 1.0)
            seqs[i].push_back(
                value_basics[i].evaluate(ctx_, s, rt.probe_n, full));
        return true;
      });
      bool empty = false;
      for (const auto& seq : seqs) empty |= seq.empty();
      BasicCase c;
      c.type = rt.cert;
      c.value = empty ? 0.0 : f.fn(seqs);
      c.exact = exact;
      cases.push_back(std::move(c));
    }
    report_.note("aggregation " + f.name + ": bounded-local exact path, xi=" +
                 std::to_string(xi) + ", " + std::to_string(cases.size()) +
                 " cases mode=" + (exact ? "exact" : "empirical"));
    if (!exact) report_.all_exact = false;
    return BasicFormula(xi, std::move(cases));
  }

  if (any_bounded)
    throw UserError("aggregation " + f.name +
                    " mixes bounded and unbounded conditioning formulas; "
                    "split it into separate aggregations");

  // asymptotic elimination path
  if (f.cls == AggregationClass::Neither)
    throw UserError("aggregation function '" + f.name +
                    "' is neither continuous nor admissible and its "
                    "conditioning is not bounded: cannot eliminate");

  for (size_t i = 0; i < infos.size(); ++i) {
    if (infos[i].tau_only) {
      report_.note("conditioning " + std::to_string(i) + ": tau-only, " +
                   std::string(infos[i].strongly_unbounded
                                   ? "strongly unbounded fast path"
                                   : "uniformly unbounded") +
                   " -> positive");
    }
  }

  // asymptotic elimination: one scan discovers the realized (sigma,gamma)-
  // closure types of the anchor part and tallies the balance counts at once,
  // so every emitted case rests on the same sampled worlds
  const Config& cfg = ctx_.config();
  const int gamma = 2 * lambda_chi + cfg.gamma_boost;

  struct Tally {
    std::map<int, std::uint64_t> case_counts;  // per matched case of an input
    std::uint64_t uncovered = 0;
    std::uint64_t denom = 0;      // |chi|
    std::uint64_t denom_tau = 0;  // |chi restricted to tau|
    int anchors = 0;
  };
  std::map<std::string, CertPtr> q_types;
  std::map<std::string, std::map<int, std::vector<Tally>>> tallies;  // q, probe

  const std::uint64_t anchor_scan_cap =
      std::max<std::uint64_t>(256, static_cast<std::uint64_t>(cfg.max_anchors) * 32);

  for (int n : cfg.probes) {
    for (int widx = 0; widx < cfg.worlds_per_probe; ++widx) {
      auto w = world(n, widx);
      PermutedTuples anchors(w->domain_size(), x_arity,
                             hash_combine(cfg.seed, hash_combine(n, widx)));
      std::uint64_t scan = std::min(anchors.size(), anchor_scan_cap);
      TupleEvaluator ev(ctx_.env_for(*w, n), all_vars);
      for (std::uint64_t ti = 0; ti < scan; ++ti) {
        Tuple a = anchors.at(ti);
        CertPtr q = ctx_.closure_type(*w, n, a, gamma, net_.sigma().size());
        q_types.emplace(q->bytes, q);
        auto& per_input = tallies[q->bytes][n];
        if (per_input.empty()) per_input.resize(infos.size());
        if (per_input[0].anchors >= cfg.max_anchors) continue;
        for (auto& t : per_input) ++t.anchors;
        Tuple full(a);
        full.resize(all_vars.size());
        ev.set_prefix(a);
        for_each_tuple(w->domain_size(), y_arity, [&](const Tuple& b) {
          for (int i = 0; i < y_arity; ++i) full[x_arity + i] = b[i];
          ev.set_suffix(x_arity, b);
          for (size_t i = 0; i < infos.size(); ++i) {
            if (!infos[i].tau_only && ev(*infos[i].tau_part) == 1.0)
              ++per_input[i].denom_tau;
            if (ev(*infos[i].formula) == 1.0) {
              ++per_input[i].denom;
              int k = value_basics[i].match(ctx_, *w, n, full);
              if (k >= 0)
                ++per_input[i].case_counts[k];
              else
                ++per_input[i].uncovered;
            }
          }
          return true;
        });
      }
    }
  }

  // y-positivity for sigma-mixed conditionings: the frequency of chi among
  // its tau-part must stay bounded away from 0. Evidence is pooled across
  // anchors and probes; types with enough observations of their own are also
  // checked individually (fine q-types over binary symbols are usually
  // realized by a single anchor, which carries no usable radius).
  for (size_t i = 0; i < infos.size(); ++i) {
    if (infos[i].tau_only) continue;
    std::uint64_t num = 0, den = 0;
    for (const auto& [qb, per_probe] : tallies)
      for (const auto& [n, per_input] : per_probe) {
        num += per_input[i].denom;
        den += per_input[i].denom_tau;
      }
    double ratio = den ? static_cast<double>(num) / den : 0.0;
    double lower = ratio - hoeffding_radius(static_cast<int>(den), cfg.confidence);
    report_.note("positivity chi_" + std::to_string(i) + " pooled ratio=" +
                 format_double(ratio) + " lower=" + format_double(lower) +
                 " observations=" + std::to_string(den));
    if (den > 0 && lower <= cfg.positivity_floor)
      throw UserError("conditioning formula " + infos[i].formula->print() +
                      " failed the y-positivity check (pooled lower bound " +
                      format_double(lower) + ")");
    for (const auto& [qb, per_probe] : tallies) {
      std::uint64_t qnum = 0, qden = 0;
      for (const auto& [n, per_input] : per_probe) {
        qnum += per_input[i].denom;
        qden += per_input[i].denom_tau;
      }
      if (qden < 30) continue;
      double qratio = static_cast<double>(qnum) / qden;
      double qlower = qratio - hoeffding_radius(static_cast<int>(qden), cfg.confidence);
      if (qlower <= cfg.positivity_floor)
        throw UserError("conditioning formula " + infos[i].formula->print() +
                        " failed the y-positivity check at q=" +
                        short_id(*q_types[qb]));
    }
  }

  std::vector<BasicCase> cases;
  for (const auto& [qb, q] : q_types) {
    const auto& per_probe = tallies[qb];
    BasicCase c;
    c.type = q;
    c.exact = false;

    // parameters from the largest probe where every input had tuples
    bool have_data = false;
    CtParameters params;
    for (auto pit = per_probe.rbegin(); pit != per_probe.rend(); ++pit) {
      const auto& per_input = pit->second;
      bool ok = true;
      for (const auto& t : per_input) ok &= t.denom > 0;
      if (!ok) continue;
      have_data = true;
      for (size_t i = 0; i < infos.size(); ++i) {
        std::vector<CtPoint> points;
        const Tally& t = per_input[i];
        for (const auto& [k, cnt] : t.case_counts)
          points.push_back({value_basics[i].cases()[k].value,
                            static_cast<double>(cnt) / t.denom});
        if (t.uncovered)
          points.push_back({0.0, static_cast<double>(t.uncovered) / t.denom});
        params.inputs.push_back(std::move(points));
      }
      break;
    }

    if (!have_data) {
      c.value = 0.0;  // the chi' case: no conditioning tuples at these anchors
      report_.note("case q=" + short_id(*q) +
                   " empty conditioning -> 0 mode=empirical");
    } else {
      // per-probe proportion trails and their three-probe stabilization flags
      for (size_t i = 0; i < infos.size(); ++i) {
        std::map<int, std::vector<double>> trail;  // case -> per-probe ratio
        std::vector<int> probes_with_data;
        for (const auto& [n, per_input] : per_probe) {
          const Tally& t = per_input[i];
          if (t.denom == 0) continue;
          probes_with_data.push_back(n);
          for (const auto& [k, cnt] : t.case_counts)
            trail[k].resize(probes_with_data.size());
          for (auto& [k, values] : trail) {
            values.resize(probes_with_data.size(), 0.0);
            auto cit = t.case_counts.find(k);
            values.back() =
                cit == t.case_counts.end()
                    ? 0.0
                    : static_cast<double>(cit->second) / t.denom;
          }
        }
        for (const auto& [k, values] : trail) {
          int window = std::min<int>(3, values.size());
          double lo = *std::min_element(values.end() - window, values.end());
          double hi = *std::max_element(values.end() - window, values.end());
          bool stab = values.size() >= 3 && hi - lo < cfg.stabilization_tol;
          std::string vals;
          for (double v : values) vals += (vals.empty() ? "" : ",") + format_double(v);
          report_.note("balance q=" + short_id(*q) + " chi_" + std::to_string(i) +
                       " point=" + format_double(value_basics[i].cases()[k].value) +
                       " probes=" + std::to_string(probes_with_data.size()) +
                       " values=" + vals + " stabilized=" + (stab ? "1" : "0"));
        }
      }
      CtLimitResult lim = ct_limit(f, params, cfg.ct_tolerance, 64, cfg.ct_length_cap);
      c.value = lim.value;
      report_.note("case q=" + short_id(*q) + " ct-limit " + f.name + " -> " +
                   format_double(lim.value) + " delta=" +
                   format_double(lim.achieved_delta) + " mode=empirical");
    }
    cases.push_back(std::move(c));
  }
  report_.all_exact = false;
  report_.note("aggregation " + f.name + ": eliminated at gamma=" +
               std::to_string(gamma) + " with " + std::to_string(cases.size()) +
               " cases");
  return BasicFormula(gamma, std::move(cases));
}

BasicFormula Compiler::compile_node(const FormulaPtr& f,
                                    const std::vector<std::string>& vars) {
  if (f->aggregation_free()) return compile_aggregation_free(*f, vars);
  switch (f->kind()) {
    case NodeKind::Connective: {
      std::vector<BasicFormula> inputs;
      for (const auto& s : f->subs()) inputs.push_back(compile_node(s, vars));
      return compose_connective(*f->conn(), inputs, vars);
    }
    case NodeKind::Aggregation:
      return eliminate_aggregation(*f, vars);
    default:
      throw InternalError("unexpected node kind in compile");
  }
}

std::pair<BasicFormula, CompileReport> Compiler::compile(const FormulaPtr& f) {
  report_ = CompileReport{};
  BasicFormula basic = compile_node(f, f->free_vars());
  report_.level = basic.level();
  report_.all_exact = basic.all_exact();
  return {std::move(basic), report_};
}

// ---------------------------------------------------------------------------
// balance and convergence

std::vector<BalanceEstimate> Compiler::balance_exact_bounded(const TypedFormula& p1,
                                                             const TypedFormula& p2) {
  if (p1.vars != p2.vars || p1.x_arity != p2.x_arity)
    throw UserError("balance: p1 and p2 must share their variable tuple");
  const int x_arity = p1.x_arity;
  const int y_arity = static_cast<int>(p1.vars.size()) - x_arity;
  if (y_arity < 1) throw UserError("balance: no aggregated variables");

  const int lambda2 = formula_radius(*p2.formula);
  const int lambda1 = formula_radius(*p1.formula);

  // precondition: p2's tau-part is y-bounded
  FormulaPtr tau_part;
  if (tau_only_formula(*p2.formula, net_.sigma())) {
    tau_part = p2.formula;
  } else {
    std::vector<std::string> x_vars(p2.vars.begin(), p2.vars.begin() + x_arity);
    std::vector<std::string> y_vars(p2.vars.begin() + x_arity, p2.vars.end());
    tau_part = analyze_conditioning(p2.formula, x_vars, y_vars).tau_part;
  }
  {
    std::vector<int> y_positions;
    for (int i = x_arity; i < x_arity + y_arity; ++i) y_positions.push_back(i);
    for (int n : ctx_.config().probes) {
      auto b = ctx_.base(n);
      double total = std::pow(static_cast<double>(b->domain_size()),
                              static_cast<double>(p2.vars.size()));
      if (total > static_cast<double>(ctx_.config().tuple_budget)) break;
      bool violated = false;
      TupleEvaluator ev(ctx_.env_for(*b, n), p2.vars);
      for_each_tuple(b->domain_size(), static_cast<int>(p2.vars.size()),
                     [&](const Tuple& t) {
                       ev.set_prefix(t);
                       if (ev(*tau_part) != 1.0) return true;
                       CertPtr c = ctx_.closure_type(*b, n, t, lambda2,
                                                     ctx_.tau().size());
                       if (ctx_.classify(*c, y_positions).verdict != Verdict::Bounded)
                         violated = true;
                       return !violated;
                     });
      if (violated)
        throw UserError("balance_exact_bounded: p2's tau-part is not y-bounded");
    }
  }

  const int total_arity = x_arity + y_arity;
  const int gamma_loc = (2 * std::max(lambda2, 0) + 1) * total_arity;
  const int xi = std::max(lambda1, lambda2) + gamma_loc;
  const Config& cfg = ctx_.config();

  struct Counts {
    std::uint64_t t = 0, s = 0;
    CertPtr q;
    bool seen = false;
  };
  std::map<std::string, Counts> per_q;
  std::map<std::string, std::map<int, double>> per_probe_value;

  const std::uint64_t scan_cap =
      std::max<std::uint64_t>(4096, static_cast<std::uint64_t>(cfg.max_anchors) * 64);
  for (int n : cfg.probes) {
    for (int widx = 0; widx < cfg.worlds_per_probe; ++widx) {
      auto w = world(n, widx);
      PermutedTuples anchors(w->domain_size(), x_arity,
                             hash_combine(cfg.seed, hash_combine(n, widx)));
      std::uint64_t scan = std::min(anchors.size(), scan_cap);
      TupleEvaluator ev(ctx_.env_for(*w, n), p1.vars);
      for (std::uint64_t ti = 0; ti < scan; ++ti) {
        Tuple a = anchors.at(ti);
        CertPtr q = ctx_.closure_type(*w, n, a, xi, net_.sigma().size());
        std::uint64_t s_count = 0, t_count = 0;
        ev.set_prefix(a);
        for_each_tuple(w->domain_size(), y_arity, [&](const Tuple& b) {
          ev.set_suffix(x_arity, b);
          if (ev(*p2.formula) == 1.0) {
            ++s_count;
            if (ev(*p1.formula) == 1.0) ++t_count;
          }
          return true;
        });
        auto& c = per_q[q->bytes];
        if (!c.seen) {
          c.q = q;
          c.t = t_count;
          c.s = s_count;
          c.seen = true;
        } else if (c.t != t_count || c.s != s_count) {
          throw InternalError(
              "bounded balance: counts not constant across q-satisfying anchors "
              "(q=" + short_id(*q) + ")");
        }
        per_probe_value[q->bytes][n] =
            c.s ? static_cast<double>(c.t) / c.s : 0.0;
      }
    }
  }

  std::vector<BalanceEstimate> out;
  for (const auto& [qb, c] : per_q) {
    BalanceEstimate e;
    e.p_id = p1.formula->print();
    e.chi_id = p2.formula->print();
    e.q_id = short_id(*c.q);
    e.exact_bounded = true;
    e.numer = c.t;
    e.denom = c.s;
    e.alpha = c.s ? static_cast<double>(c.t) / c.s : 0.0;
    for (const auto& [n, v] : per_probe_value[qb]) {
      e.probe_sizes.push_back(n);
      e.per_probe.push_back(v);
    }
    e.stabilized = true;
    e.positive = e.alpha > 0;
    e.lower_confidence = e.alpha;
    out.push_back(std::move(e));
  }
  return out;
}

BalanceEstimate Compiler::balance_estimate(const TypedFormula& p,
                                           const TypedFormula& chi,
                                           const TypeCertificate& q) {
  if (p.vars != chi.vars || p.x_arity != chi.x_arity)
    throw UserError("balance: p and chi must share their variable tuple");
  const int x_arity = p.x_arity;
  const int y_arity = static_cast<int>(p.vars.size()) - x_arity;
  const Config& cfg = ctx_.config();

  {
    std::vector<std::string> x_vars(chi.vars.begin(), chi.vars.begin() + x_arity);
    std::vector<std::string> y_vars(chi.vars.begin() + x_arity, chi.vars.end());
    ConditioningInfo info = analyze_conditioning(chi.formula, x_vars, y_vars);
    if (info.satisfiable && info.y_bounded)
      throw UserError("balance_estimate: chi is y-bounded; use the exact path");
  }

  BalanceEstimate e;
  e.p_id = p.formula->print();
  e.chi_id = chi.formula->print();
  e.q_id = short_id(q);

  double sum = 0;
  int count = 0;
  for (int n : cfg.probes) {
    double probe_sum = 0;
    int probe_count = 0;
    for (int widx = 0; widx < cfg.worlds_per_probe; ++widx) {
      auto w = world(n, widx);
      int anchors_used = 0;
      PermutedTuples perm(w->domain_size(), x_arity,
                          hash_combine(cfg.seed, hash_combine(n, widx)));
      std::uint64_t candidate_cap = std::min(
          perm.size(),
          std::max<std::uint64_t>(512,
                                  static_cast<std::uint64_t>(cfg.max_anchors) * 64));
      for (std::uint64_t ti = 0; ti < candidate_cap; ++ti) {
        Tuple a = perm.at(ti);
        if (anchors_used >= cfg.max_anchors) break;
        if (!ctx_.satisfies(*w, n, a, q)) continue;
        ++anchors_used;
        std::uint64_t denom = 0, numer = 0;
        TupleEvaluator ev(ctx_.env_for(*w, n), p.vars);
        ev.set_prefix(a);
        for_each_tuple(w->domain_size(), y_arity, [&](const Tuple& b) {
          ev.set_suffix(x_arity, b);
          if (ev(*chi.formula) == 1.0) {
            ++denom;
            if (ev(*p.formula) == 1.0) ++numer;
          }
          return true;
        });
        if (denom == 0) {
          ++e.empty_conditions;
          continue;
        }
        double ratio = static_cast<double>(numer) / denom;
        probe_sum += ratio;
        ++probe_count;
      }
    }
    if (probe_count > 0) {
      e.probe_sizes.push_back(n);
      e.per_probe.push_back(probe_sum / probe_count);
      sum += probe_sum;
      count += probe_count;
    }
  }
  if (count == 0)
    throw UserError("balance_estimate: every conditioning set was empty");
  e.alpha = sum / count;
  e.observations = count;
  double radius = hoeffding_radius(count, cfg.confidence);
  e.lower_confidence = e.alpha - radius;
  e.positive = e.lower_confidence > cfg.positivity_floor;
  if (e.per_probe.size() >= 3) {
    double lo = *std::min_element(e.per_probe.end() - 3, e.per_probe.end());
    double hi = *std::max_element(e.per_probe.end() - 3, e.per_probe.end());
    e.stabilized = hi - lo < cfg.stabilization_tol;
  }
  return e;
}

ConvergenceEstimate Compiler::convergence_estimate(
    const FormulaPtr& p, const std::vector<std::string>& vars,
    const TypeCertificate& p_tau) {
  if (p_tau.scope.size() != ctx_.tau().size())
    throw UserError("convergence estimate conditions on a tau-closure type");
  if (p_tau.anchor_arity != static_cast<int>(vars.size()))
    throw UserError("convergence estimate: variable tuple arity mismatch");
  const Config& cfg = ctx_.config();

  ConvergenceEstimate e;
  e.p_id = p->print();
  e.ptau_id = short_id(p_tau);

  bool any_valid = false;
  for (int n : cfg.probes) {
    auto b = ctx_.base(n);
    std::optional<Tuple> anchor;
    for_each_tuple(b->domain_size(), p_tau.anchor_arity, [&](const Tuple& t) {
      if (ctx_.satisfies(*b, n, t, p_tau)) {
        anchor = t;
        return false;
      }
      return true;
    });
    e.probe_sizes.push_back(n);
    if (!anchor) {
      e.valid.push_back(false);
      e.exact.push_back(false);
      e.per_probe.push_back(0);
      continue;
    }
    any_valid = true;
    Assignment at;
    for (size_t i = 0; i < vars.size(); ++i) at.emplace_back(vars[i], (*anchor)[i]);

    // exact by enumeration when the world count fits the budget
    double world_count = 1;
    const Signature& sigma = net_.sigma();
    for (int s = sigma.tau_prefix_len(); s < sigma.size(); ++s)
      world_count *= std::pow(
          2.0, std::pow(static_cast<double>(b->domain_size()),
                        sigma.symbol(s).arity));
    if (world_count <= static_cast<double>(cfg.enumeration_budget)) {
      double value = 0;
      for_each_world(
          net_, *b, cfg.enumeration_budget,
          [&](const Structure& w, double prob) {
            EvalEnv env = ctx_.env_for(w, n);
            double v = evaluate(env, *p, at);
            if (v != 0.0 && v != 1.0)
              throw UserError("convergence estimate needs a 0/1-valued formula");
            if (v == 1.0) value += prob;
          },
          cfg.tuple_budget);
      e.per_probe.push_back(value);
      e.exact.push_back(true);
    } else {
      int hits = 0;
      for (int i = 0; i < cfg.samples; ++i) {
        std::uint64_t seed = hash_combine(hash_combine(cfg.seed, 0xc07),
                                          hash_combine(static_cast<std::uint64_t>(n),
                                                       static_cast<std::uint64_t>(i)));
        World w = sample_world(net_, *b, seed, cfg.tuple_budget);
        EvalEnv env = ctx_.env_for(w.structure, n);
        double v = evaluate(env, *p, at);
        if (v != 0.0 && v != 1.0)
          throw UserError("convergence estimate needs a 0/1-valued formula");
        hits += v == 1.0;
      }
      e.per_probe.push_back(static_cast<double>(hits) / cfg.samples);
      e.exact.push_back(false);
    }
    e.valid.push_back(true);
  }
  if (!any_valid)
    throw UserError("convergence estimate: the tau-type is unrealized at every probe");

  std::vector<double> valid_values;
  for (size_t i = 0; i < e.per_probe.size(); ++i)
    if (e.valid[i]) valid_values.push_back(e.per_probe[i]);
  e.alpha = valid_values.back();
  if (valid_values.size() >= 3) {
    double lo = *std::min_element(valid_values.end() - 3, valid_values.end());
    double hi = *std::max_element(valid_values.end() - 3, valid_values.end());
    e.stabilized = hi - lo < cfg.stabilization_tol;
  }
  e.eventually_constant =
      std::adjacent_find(valid_values.begin(), valid_values.end(),
                         [](double a, double b) { return a != b; }) ==
      valid_values.end();
  return e;
}

std::vector<std::pair<double, ConvergenceEstimate>> Compiler::value_distribution(
    const BasicFormula& basic, const TypeCertificate& p_tau) {
  auto groups = basic.value_groups();
  std::vector<std::string> vars;
  for (int i = 0; i < basic.anchor_arity(); ++i)
    vars.push_back("v" + std::to_string(i));

  std::vector<std::pair<double, ConvergenceEstimate>> out;
  for (const auto& [value, types] : groups) {
    std::vector<FormulaPtr> atoms;
    for (const auto& t : types) atoms.push_back(Formula::type_atom(t, vars));
    FormulaPtr p = atoms.size() == 1
                       ? atoms[0]
                       : Formula::connective(
                             ConnectiveRegistry::builtins().lookup(
                                 "or", static_cast<int>(atoms.size())),
                             atoms);
    out.push_back({value, convergence_estimate(p, vars, p_tau)});
  }
  return out;
}

EquivalenceReport Compiler::check_asymptotic_equivalence(const FormulaPtr& f,
                                                         const BasicFormula& basic,
                                                         double eps) {
  const Config& cfg = ctx_.config();
  std::vector<std::string> vars = f->free_vars();
  if (!basic.cases().empty() &&
      static_cast<int>(vars.size()) != basic.anchor_arity())
    throw UserError("equivalence check: formula and basic formula arity mismatch");

  EquivalenceReport rep;
  rep.epsilon = eps;
  for (int n : cfg.probes) {
    int deviating = 0;
    for (int i = 0; i < cfg.samples; ++i) {
      std::uint64_t seed = hash_combine(hash_combine(cfg.seed, 0xe91),
                                        hash_combine(static_cast<std::uint64_t>(n),
                                                     static_cast<std::uint64_t>(i)));
      World w = sample_world(net_, *ctx_.base(n), seed, cfg.tuple_budget);
      bool off = false;
      TupleEvaluator ev(ctx_.env_for(w.structure, n), vars);
      for_each_tuple(w.structure.domain_size(), static_cast<int>(vars.size()),
                     [&](const Tuple& t) {
                       ev.set_prefix(t);
                       double direct = ev(*f);
                       double compiled =
                           basic.evaluate(ctx_, w.structure, n, t);
                       if (std::fabs(direct - compiled) > eps) {
                         off = true;
                         return false;
                       }
                       return true;
                     });
      deviating += off;
    }
    rep.probe_sizes.push_back(n);
    rep.deviation_fraction.push_back(static_cast<double>(deviating) / cfg.samples);
  }
  bool trend_ok = rep.deviation_fraction.back() <=
                  rep.deviation_fraction.front() + cfg.stabilization_tol;
  rep.pass = trend_ok &&
             rep.deviation_fraction.back() <= cfg.equivalence_ceiling;
  return rep;
}

}  // namespace plastar
