#include "plastar/formula.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>

namespace plastar {

namespace {

void check_unit_range(double v, const std::string& what) {
  if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
    throw InternalError(what + " produced value outside [0,1]: " + format_double(v));
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Registries

void ConnectiveRegistry::register_connective(
    const std::string& name, int arity,
    std::function<double(const std::vector<double>&)> fn) {
  // spot-check the map on a deterministic grid of inputs
  std::uint64_t h = 12345;
  for (int trial = 0; trial < 64; ++trial) {
    std::vector<double> args;
    for (int i = 0; i < std::max(arity, 1); ++i) {
      h = mix64(h + trial + i);
      args.push_back(unit_uniform(h));
    }
    double v = fn(args);
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
      throw UserError("connective '" + name + "' leaves [0,1] on validation samples");
  }
  auto c = std::make_shared<Connective>();
  c->name = name;
  c->arity = arity;
  c->fn = std::move(fn);
  entries_.push_back(std::move(c));
}

ConnectivePtr ConnectiveRegistry::lookup(const std::string& name, int arity) const {
  for (const auto& e : entries_) {
    if (e->name != name) continue;
    if (e->arity == arity) return e;
    if (e->arity < 0 && arity >= 1) {
      auto c = std::make_shared<Connective>();
      c->name = e->name;
      c->arity = arity;
      c->fn = e->fn;
      return c;
    }
  }
  return nullptr;
}

bool ConnectiveRegistry::known(const std::string& name) const {
  for (const auto& e : entries_)
    if (e->name == name) return true;
  return false;
}

const ConnectiveRegistry& ConnectiveRegistry::builtins() {
  static const ConnectiveRegistry* reg = [] {
    auto* r = new ConnectiveRegistry();
    r->register_connective("not", 1, [](const std::vector<double>& a) { return 1.0 - a[0]; });
    // Lukasiewicz: and = min, or = max, implies(x,y) = min(1, 1-x+y).
    // and/or/avg accept any arity (arity -1 marks a variadic family).
    auto min_fn = [](const std::vector<double>& a) {
      return *std::min_element(a.begin(), a.end());
    };
    auto max_fn = [](const std::vector<double>& a) {
      return *std::max_element(a.begin(), a.end());
    };
    auto avg_fn = [](const std::vector<double>& a) {
      double s = 0;
      for (double v : a) s += v;
      return s / static_cast<double>(a.size());
    };
    r->entries_.push_back(std::make_shared<Connective>(Connective{"and", -1, min_fn}));
    r->entries_.push_back(std::make_shared<Connective>(Connective{"or", -1, max_fn}));
    r->entries_.push_back(std::make_shared<Connective>(Connective{"avg", -1, avg_fn}));
    r->register_connective("implies", 2, [](const std::vector<double>& a) {
      return std::min(1.0, 1.0 - a[0] + a[1]);
    });
    r->register_connective("prod", 2, [](const std::vector<double>& a) {
      return a[0] * a[1];
    });
    return r;
  }();
  return *reg;
}

void AggregationRegistry::register_aggregation(
    const std::string& name, int arity, AggregationClass cls,
    std::function<double(const std::vector<std::vector<double>>&)> fn) {
  std::uint64_t h = 777;
  for (int trial = 0; trial < 32; ++trial) {
    std::vector<std::vector<double>> seqs(arity);
    for (auto& s : seqs) {
      h = mix64(h + trial);
      int len = 1 + static_cast<int>(h % 5);
      for (int i = 0; i < len; ++i) {
        h = mix64(h + i);
        s.push_back(unit_uniform(h));
      }
    }
    double v = fn(seqs);
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
      throw UserError("aggregation '" + name + "' leaves [0,1] on validation samples");
  }
  auto a = std::make_shared<AggregationFunction>();
  a->name = name;
  a->arity = arity;
  a->cls = cls;
  a->fn = std::move(fn);
  entries_.push_back(std::move(a));
}

AggregationPtr AggregationRegistry::lookup(const std::string& name) const {
  for (const auto& e : entries_)
    if (e->name == name) return e;
  return nullptr;
}

bool AggregationRegistry::known(const std::string& name) const {
  return lookup(name) != nullptr;
}

const AggregationRegistry& AggregationRegistry::builtins() {
  static const AggregationRegistry* reg = [] {
    auto* r = new AggregationRegistry();
    using Seqs = std::vector<std::vector<double>>;
    r->register_aggregation("max", 1, AggregationClass::Admissible, [](const Seqs& s) {
      return *std::max_element(s[0].begin(), s[0].end());
    });
    r->register_aggregation("min", 1, AggregationClass::Admissible, [](const Seqs& s) {
      return *std::min_element(s[0].begin(), s[0].end());
    });
    r->register_aggregation("am", 1, AggregationClass::Continuous, [](const Seqs& s) {
      double sum = 0;
      for (double v : s[0]) sum += v;
      return sum / static_cast<double>(s[0].size());
    });
    r->register_aggregation("gm", 1, AggregationClass::Continuous, [](const Seqs& s) {
      double log_sum = 0;
      for (double v : s[0]) {
        if (v == 0.0) return 0.0;
        log_sum += std::log(v);
      }
      return std::exp(log_sum / static_cast<double>(s[0].size()));
    });
    r->register_aggregation("invlen", 1, AggregationClass::Continuous, [](const Seqs& s) {
      return 1.0 / static_cast<double>(s[0].size());
    });
    r->register_aggregation("tsum", 1, AggregationClass::Continuous, [](const Seqs& s) {
      double sum = 0;
      for (double v : s[0]) {
        sum += v;
        if (sum >= 1.0) return 1.0;
      }
      return sum;
    });
    r->register_aggregation("noisyor", 1, AggregationClass::Neither, [](const Seqs& s) {
      double prod = 1;
      for (double v : s[0]) prod *= 1.0 - v;
      return 1.0 - prod;
    });
    return r;
  }();
  return *reg;
}

// ---------------------------------------------------------------------------
// Node construction

class FormulaBuilderAccess {
 public:
  static std::shared_ptr<Formula> make() {
    return std::shared_ptr<Formula>(new Formula());
  }
};

namespace {

std::shared_ptr<Formula> fresh() { return FormulaBuilderAccess::make(); }

}  // namespace

void Formula::collect_bound_vars(std::vector<std::string>& out) const {
  if (kind_ == NodeKind::Aggregation)
    out.insert(out.end(), vars_.begin(), vars_.end());
  for (const auto& s : subs_) s->collect_bound_vars(out);
  for (const auto& s : values_) s->collect_bound_vars(out);
  for (const auto& s : conds_) s->collect_bound_vars(out);
}

FormulaPtr Formula::constant(double c) {
  if (!(c >= 0.0 && c <= 1.0))
    throw UserError("constant outside [0,1]: " + format_double(c));
  auto f = fresh();
  f->kind_ = NodeKind::Const;
  f->const_value_ = c;
  return f;
}

FormulaPtr Formula::eq(std::string x, std::string y) {
  auto f = fresh();
  f->kind_ = NodeKind::Eq;
  f->symbol_ = std::move(x);
  f->var_b_ = std::move(y);
  f->free_vars_ = sorted_unique({f->symbol_, f->var_b_});
  return f;
}

FormulaPtr Formula::atom(std::string symbol, std::vector<std::string> vars) {
  auto f = fresh();
  f->kind_ = NodeKind::Atom;
  f->symbol_ = std::move(symbol);
  f->vars_ = std::move(vars);
  f->free_vars_ = sorted_unique(f->vars_);
  return f;
}

FormulaPtr Formula::dist_leq(std::string x, std::string y, int bound) {
  if (bound < 0) throw UserError("dist bound must be a natural number");
  auto f = fresh();
  f->kind_ = NodeKind::DistLeq;
  f->symbol_ = std::move(x);
  f->var_b_ = std::move(y);
  f->dist_bound_ = bound;
  f->free_vars_ = sorted_unique({f->symbol_, f->var_b_});
  return f;
}

FormulaPtr Formula::connective(ConnectivePtr conn, std::vector<FormulaPtr> subs) {
  if (!conn) throw UserError("null connective");
  if (static_cast<int>(subs.size()) != conn->arity)
    throw UserError("connective '" + conn->name + "' expects " +
                    std::to_string(conn->arity) + " arguments, got " +
                    std::to_string(subs.size()));
  auto f = fresh();
  f->kind_ = NodeKind::Connective;
  f->conn_ = std::move(conn);
  f->subs_ = std::move(subs);
  std::vector<std::string> frees, bound;
  for (const auto& s : f->subs_) {
    frees.insert(frees.end(), s->free_vars().begin(), s->free_vars().end());
    s->collect_bound_vars(bound);
  }
  f->free_vars_ = sorted_unique(std::move(frees));
  for (const auto& b : bound)
    if (std::binary_search(f->free_vars_.begin(), f->free_vars_.end(), b))
      throw UserError("variable '" + b + "' is bound in a subformula but free in a sibling");
  return f;
}

FormulaPtr Formula::aggregation(AggregationPtr agg, std::vector<FormulaPtr> values,
                                std::vector<std::string> bound_vars,
                                std::vector<FormulaPtr> conditions) {
  if (!agg) throw UserError("null aggregation function");
  if (values.size() != conditions.size() ||
      static_cast<int>(values.size()) != agg->arity)
    throw UserError("aggregation '" + agg->name + "' expects " +
                    std::to_string(agg->arity) + " value and conditioning formulas");
  if (bound_vars.empty()) throw UserError("aggregation must bind at least one variable");
  auto distinct = sorted_unique(bound_vars);
  if (distinct.size() != bound_vars.size())
    throw UserError("aggregation binds a repeated variable");

  auto f = fresh();
  f->kind_ = NodeKind::Aggregation;
  f->agg_ = std::move(agg);
  f->values_ = std::move(values);
  f->conds_ = std::move(conditions);
  f->vars_ = std::move(bound_vars);

  std::vector<std::string> frees, inner_bound;
  for (const auto& s : f->values_) {
    frees.insert(frees.end(), s->free_vars().begin(), s->free_vars().end());
    s->collect_bound_vars(inner_bound);
  }
  for (const auto& s : f->conds_) {
    frees.insert(frees.end(), s->free_vars().begin(), s->free_vars().end());
    s->collect_bound_vars(inner_bound);
  }
  for (const auto& y : f->vars_)
    for (const auto& b : inner_bound)
      if (y == b)
        throw UserError("variable '" + y + "' is bound twice in nested aggregations");
  frees = sorted_unique(std::move(frees));
  std::vector<std::string> outer;
  for (const auto& v : frees)
    if (std::find(f->vars_.begin(), f->vars_.end(), v) == f->vars_.end())
      outer.push_back(v);
  f->free_vars_ = std::move(outer);
  for (const auto& b : inner_bound)
    if (std::binary_search(f->free_vars_.begin(), f->free_vars_.end(), b))
      throw UserError("variable '" + b + "' is bound in a subformula but free in a sibling");
  return f;
}

FormulaPtr Formula::type_atom(CertPtr type, std::vector<std::string> vars) {
  if (!type) throw UserError("null type certificate");
  if (static_cast<int>(vars.size()) != type->anchor_arity)
    throw UserError("type atom arity mismatch: certificate has anchor arity " +
                    std::to_string(type->anchor_arity));
  auto f = fresh();
  f->kind_ = NodeKind::TypeAtom;
  f->type_ = std::move(type);
  f->vars_ = std::move(vars);
  f->free_vars_ = sorted_unique(f->vars_);
  return f;
}

bool Formula::aggregation_free() const {
  if (kind_ == NodeKind::Aggregation) return false;
  for (const auto& s : subs_)
    if (!s->aggregation_free()) return false;
  return true;
}

bool Formula::structurally_equal(const Formula& o) const {
  if (kind_ != o.kind_) return false;
  switch (kind_) {
    case NodeKind::Const:
      return const_value_ == o.const_value_;
    case NodeKind::Eq:
      return symbol_ == o.symbol_ && var_b_ == o.var_b_;
    case NodeKind::Atom:
      return symbol_ == o.symbol_ && vars_ == o.vars_;
    case NodeKind::DistLeq:
      return symbol_ == o.symbol_ && var_b_ == o.var_b_ && dist_bound_ == o.dist_bound_;
    case NodeKind::Connective: {
      if (conn_->name != o.conn_->name || subs_.size() != o.subs_.size()) return false;
      for (size_t i = 0; i < subs_.size(); ++i)
        if (!subs_[i]->structurally_equal(*o.subs_[i])) return false;
      return true;
    }
    case NodeKind::Aggregation: {
      if (agg_->name != o.agg_->name || vars_ != o.vars_ ||
          values_.size() != o.values_.size())
        return false;
      for (size_t i = 0; i < values_.size(); ++i)
        if (!values_[i]->structurally_equal(*o.values_[i]) ||
            !conds_[i]->structurally_equal(*o.conds_[i]))
          return false;
      return true;
    }
    case NodeKind::TypeAtom:
      return type_->bytes == o.type_->bytes && vars_ == o.vars_;
  }
  return false;
}

std::string Formula::print() const {
  switch (kind_) {
    case NodeKind::Const:
      return format_double(const_value_);
    case NodeKind::Eq:
      return symbol_ + " = " + var_b_;
    case NodeKind::Atom: {
      std::string out = symbol_ + "(";
      for (size_t i = 0; i < vars_.size(); ++i)
        out += (i ? ", " : "") + vars_[i];
      return out + ")";
    }
    case NodeKind::DistLeq:
      return "dist(" + symbol_ + ", " + var_b_ + ") <= " + std::to_string(dist_bound_);
    case NodeKind::Connective: {
      std::string out = conn_->name + "(";
      for (size_t i = 0; i < subs_.size(); ++i)
        out += (i ? ", " : "") + subs_[i]->print();
      return out + ")";
    }
    case NodeKind::Aggregation: {
      std::string out = agg_->name + "[";
      for (size_t i = 0; i < values_.size(); ++i)
        out += (i ? ", " : "") + values_[i]->print();
      out += " : ";
      for (size_t i = 0; i < vars_.size(); ++i) out += (i ? " " : "") + vars_[i];
      out += " : ";
      for (size_t i = 0; i < conds_.size(); ++i)
        out += (i ? ", " : "") + conds_[i]->print();
      return out + "]";
    }
    case NodeKind::TypeAtom: {
      std::string out = "ctype:" + type_->hex() + "(";
      for (size_t i = 0; i < vars_.size(); ++i)
        out += (i ? ", " : "") + vars_[i];
      return out + ")";
    }
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

Element lookup_var(const Assignment& asg, const std::string& name) {
  for (auto it = asg.rbegin(); it != asg.rend(); ++it)
    if (it->first == name) return it->second;
  throw UserError("unassigned free variable '" + name + "'");
}

}  // namespace

namespace {

double eval_node(const EvalEnv& env, const Formula& node, Assignment& asg) {
  const Structure& s = *env.structure;
  switch (node.kind()) {
      case NodeKind::Const:
        return node.const_value();
      case NodeKind::Eq: {
        Element a = lookup_var(asg, node.symbol());
        Element b = lookup_var(asg, node.second_var());
        return a == b ? 1.0 : 0.0;
      }
      case NodeKind::Atom: {
        auto idx = s.signature().index_of(node.symbol());
        if (!idx)
          throw UserError("relation symbol '" + node.symbol() +
                          "' not in structure signature");
        if (s.signature().symbol(*idx).arity != static_cast<int>(node.vars().size()))
          throw UserError("arity mismatch for relation '" + node.symbol() + "'");
        Tuple t;
        t.reserve(node.vars().size());
        for (const auto& v : node.vars()) t.push_back(lookup_var(asg, v));
        return s.holds(*idx, t) ? 1.0 : 0.0;
      }
      case NodeKind::DistLeq: {
        Element a = lookup_var(asg, node.symbol());
        Element b = lookup_var(asg, node.second_var());
        return s.dist(a, b, node.dist_bound()) <= node.dist_bound() ? 1.0 : 0.0;
      }
      case NodeKind::TypeAtom: {
        const TypeCertificate& t = *node.type();
        if (t.scope.size() > s.signature().size() ||
            s.signature().prefix(t.scope.size()) != t.scope)
          throw UserError("type atom scope is not a prefix of the structure signature");
        Tuple anchors;
        anchors.reserve(node.vars().size());
        for (const auto& v : node.vars()) anchors.push_back(lookup_var(asg, v));
        if (env.cert_provider) {
          CertPtr here =
              env.cert_provider(s, anchors, t.radius, t.kind, t.scope.size());
          return here->bytes == t.bytes ? 1.0 : 0.0;
        }
        std::vector<Element> rare;
        if (t.kind == TypeCertificate::Kind::Closure) {
          if (!env.rare_provider)
            throw UserError("closure-type atom needs a rare-element provider");
          rare = env.rare_provider(t.radius);
        }
        CertPtr here = certificate_of(s, anchors, t.radius, t.kind,
                                      t.scope.size(), rare);
        return here->bytes == t.bytes ? 1.0 : 0.0;
      }
      case NodeKind::Connective: {
        std::vector<double> args;
        args.reserve(node.subs().size());
        for (const auto& sub : node.subs()) args.push_back(eval_node(env, *sub, asg));
        double v = node.conn()->fn(args);
        check_unit_range(v, "connective " + node.conn()->name);
        return clamp01(v);
      }
      case NodeKind::Aggregation: {
        const int l = static_cast<int>(node.bound_vars().size());
        const int n = s.domain_size();
        double total = std::pow(static_cast<double>(n), l);
        if (total > static_cast<double>(env.tuple_budget))
          throw BudgetError("aggregation tuple scan " + format_double(total) +
                            " exceeds budget " + std::to_string(env.tuple_budget));
        const int m = node.agg()->arity;
        std::vector<std::vector<double>> seqs(m);
        if (n > 0) {
          Tuple b(l, 0);
          size_t base = asg.size();
          for (int i = 0; i < l; ++i) asg.emplace_back(node.bound_vars()[i], 0);
          bool carry_done = false;
          while (!carry_done) {
            for (int i = 0; i < l; ++i) asg[base + i].second = b[i];
            for (int i = 0; i < m; ++i) {
              if (eval_node(env, *node.conditions()[i], asg) == 1.0)
                seqs[i].push_back(eval_node(env, *node.values()[i], asg));
            }
            // next tuple in lexicographic order
            int pos = l - 1;
            while (pos >= 0) {
              if (++b[pos] < n) break;
              b[pos] = 0;
              --pos;
            }
            carry_done = pos < 0;
          }
          asg.resize(base);
        }
        for (const auto& seq : seqs)
          if (seq.empty()) return 0.0;
        double v = node.agg()->fn(seqs);
        check_unit_range(v, "aggregation " + node.agg()->name);
        return clamp01(v);
      }
  }
  throw InternalError("unhandled formula node kind");
}

}  // namespace

double evaluate(const EvalEnv& env, const Formula& f, const Assignment& assignment) {
  if (!env.structure) throw UserError("evaluation requires a structure");
  Assignment asg(assignment);
  return eval_node(env, f, asg);
}

double evaluate_with(const EvalEnv& env, const Formula& f, Assignment& scratch) {
  if (!env.structure) throw UserError("evaluation requires a structure");
  return eval_node(env, f, scratch);
}

double evaluate(const Structure& s, const Formula& f, const Assignment& assignment) {
  EvalEnv env;
  env.structure = &s;
  return evaluate(env, f, assignment);
}

ZeroOne is_01_valued(const Formula& f) {
  switch (f.kind()) {
    case NodeKind::Const:
      return (f.const_value() == 0.0 || f.const_value() == 1.0) ? ZeroOne::Yes
                                                                : ZeroOne::Unknown;
    case NodeKind::Eq:
    case NodeKind::Atom:
    case NodeKind::DistLeq:
    case NodeKind::TypeAtom:
      return ZeroOne::Yes;
    case NodeKind::Connective: {
      const std::string& n = f.conn()->name;
      if (n != "not" && n != "and" && n != "or" && n != "implies")
        return ZeroOne::Unknown;
      for (const auto& s : f.subs())
        if (is_01_valued(*s) != ZeroOne::Yes) return ZeroOne::Unknown;
      return ZeroOne::Yes;
    }
    case NodeKind::Aggregation: {
      const std::string& n = f.agg()->name;
      if (n != "max" && n != "min") return ZeroOne::Unknown;
      for (const auto& v : f.values())
        if (is_01_valued(*v) != ZeroOne::Yes) return ZeroOne::Unknown;
      return ZeroOne::Yes;
    }
  }
  return ZeroOne::Unknown;
}

namespace {

void collect_sites(const FormulaPtr& f, std::vector<AggregationSite>& out) {
  for (const auto& s : f->subs()) collect_sites(s, out);
  for (const auto& s : f->values()) collect_sites(s, out);
  for (const auto& s : f->conditions()) collect_sites(s, out);
  if (f->kind() == NodeKind::Aggregation)
    out.push_back({f.get(), f->values(), f->conditions(), f->agg()});
}

}  // namespace

std::vector<AggregationSite> conditioning_subformulas(const Formula& f) {
  std::vector<AggregationSite> out;
  // share ownership through a non-deleting alias so recursion is uniform
  FormulaPtr alias(&f, [](const Formula*) {});
  collect_sites(alias, out);
  return out;
}

}  // namespace plastar
