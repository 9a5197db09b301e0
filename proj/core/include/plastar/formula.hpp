#ifndef PLASTAR_FORMULA_HPP
#define PLASTAR_FORMULA_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plastar/certificate.hpp"
#include "plastar/structure.hpp"

namespace plastar {

// A connective: a map [0,1]^k -> [0,1], continuous per the logic's syntax.
struct Connective {
  std::string name;
  int arity;
  std::function<double(const std::vector<double>&)> fn;
};
using ConnectivePtr = std::shared_ptr<const Connective>;

enum class AggregationClass { Continuous, Admissible, Neither };

// An aggregation function: a symmetric map from m nonempty [0,1]-sequences
// to [0,1]. The class records ct-continuity: Continuous functions tolerate
// every convergence-testing parameter choice, Admissible ones only strictly
// positive proportions.
struct AggregationFunction {
  std::string name;
  int arity;  // number of input sequences
  AggregationClass cls;
  std::function<double(const std::vector<std::vector<double>>&)> fn;
};
using AggregationPtr = std::shared_ptr<const AggregationFunction>;

class ConnectiveRegistry {
 public:
  static const ConnectiveRegistry& builtins();

  // Registered maps are spot-checked on random inputs; a map that leaves
  // [0,1] is rejected with a registration error.
  void register_connective(const std::string& name, int arity,
                           std::function<double(const std::vector<double>&)> fn);

  // Looks up `name` at the requested arity. Variadic builtins (and, or, avg)
  // resolve at any arity >= 1.
  ConnectivePtr lookup(const std::string& name, int arity) const;
  bool known(const std::string& name) const;

 private:
  std::vector<ConnectivePtr> entries_;
};

class AggregationRegistry {
 public:
  static const AggregationRegistry& builtins();
  void register_aggregation(const std::string& name, int arity, AggregationClass cls,
                            std::function<double(const std::vector<std::vector<double>>&)> fn);
  AggregationPtr lookup(const std::string& name) const;
  bool known(const std::string& name) const;
  const std::vector<AggregationPtr>& entries() const { return entries_; }

 private:
  std::vector<AggregationPtr> entries_;
};

enum class NodeKind { Const, Eq, Atom, DistLeq, Connective, Aggregation, TypeAtom };

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

// Immutable PLA* formula node. Variables are carried by name; the
// free-variable set is cached at construction.
class Formula : public std::enable_shared_from_this<Formula> {
 public:
  static FormulaPtr constant(double c);
  static FormulaPtr top() { return constant(1.0); }
  static FormulaPtr bottom() { return constant(0.0); }
  static FormulaPtr eq(std::string x, std::string y);
  static FormulaPtr atom(std::string symbol, std::vector<std::string> vars);
  static FormulaPtr dist_leq(std::string x, std::string y, int bound);
  static FormulaPtr connective(ConnectivePtr conn, std::vector<FormulaPtr> subs);
  static FormulaPtr aggregation(AggregationPtr agg, std::vector<FormulaPtr> values,
                                std::vector<std::string> bound_vars,
                                std::vector<FormulaPtr> conditions);
  static FormulaPtr type_atom(CertPtr type, std::vector<std::string> vars);

  NodeKind kind() const { return kind_; }
  double const_value() const { return const_value_; }
  const std::string& symbol() const { return symbol_; }
  const std::string& second_var() const { return var_b_; }  // Eq / DistLeq
  const std::vector<std::string>& vars() const { return vars_; }
  int dist_bound() const { return dist_bound_; }
  const ConnectivePtr& conn() const { return conn_; }
  const AggregationPtr& agg() const { return agg_; }
  const std::vector<FormulaPtr>& subs() const { return subs_; }
  const std::vector<FormulaPtr>& values() const { return values_; }
  const std::vector<FormulaPtr>& conditions() const { return conds_; }
  const std::vector<std::string>& bound_vars() const { return vars_; }
  const CertPtr& type() const { return type_; }

  const std::vector<std::string>& free_vars() const { return free_vars_; }
  bool aggregation_free() const;
  bool structurally_equal(const Formula& other) const;

  std::string print() const;  // canonical grammar form

 private:
  Formula() = default;
  void collect_bound_vars(std::vector<std::string>& out) const;

  NodeKind kind_ = NodeKind::Const;
  double const_value_ = 0.0;
  std::string symbol_;             // Atom relation name; Eq/DistLeq var x
  std::string var_b_;              // Eq/DistLeq var y
  int dist_bound_ = 0;
  std::vector<std::string> vars_;  // Atom/TypeAtom argument vars; Aggregation bound vars
  ConnectivePtr conn_;
  AggregationPtr agg_;
  std::vector<FormulaPtr> subs_;
  std::vector<FormulaPtr> values_;
  std::vector<FormulaPtr> conds_;
  CertPtr type_;
  std::vector<std::string> free_vars_;  // sorted

  friend class FormulaBuilderAccess;
};

// Environment for evaluation: the structure, an optional provider of the
// base structure's lambda-rare element sets (required by closure-type atoms),
// an optional memoizing certificate provider, and the tuple-enumeration
// budget for aggregations.
struct EvalEnv {
  const Structure* structure = nullptr;
  std::function<std::vector<Element>(int)> rare_provider;  // may be empty
  // (structure, anchors, radius, kind, scope_len) -> certificate
  std::function<CertPtr(const Structure&, const Tuple&, int,
                        TypeCertificate::Kind, int)>
      cert_provider;  // may be empty; closure kinds then use rare_provider
  std::uint64_t tuple_budget = 20'000'000;
};

using Assignment = std::vector<std::pair<std::string, Element>>;

// The five-case semantics. `assignment` must assign every free variable.
double evaluate(const EvalEnv& env, const Formula& f, const Assignment& assignment);
double evaluate(const Structure& s, const Formula& f, const Assignment& assignment);

// Hot-path variant: evaluates against a caller-owned scratch assignment that
// bound variables are pushed onto and popped from in place.
double evaluate_with(const EvalEnv& env, const Formula& f, Assignment& scratch);

enum class ZeroOne { Yes, Unknown };

// Conservative syntactic 0/1-valuedness check (never a false "yes").
ZeroOne is_01_valued(const Formula& f);

struct AggregationSite {
  const Formula* node;  // the aggregation node itself
  std::vector<FormulaPtr> values;
  std::vector<FormulaPtr> conditions;
  AggregationPtr fn;
};
// All aggregation nodes in post-order (inner before outer).
std::vector<AggregationSite> conditioning_subformulas(const Formula& f);

// Parsing. The signature resolves relation atoms; registries resolve
// connective and aggregation names. Errors carry the byte offset.
FormulaPtr parse_formula(const std::string& text, const Signature& sig,
                         const ConnectiveRegistry& conns = ConnectiveRegistry::builtins(),
                         const AggregationRegistry& aggs = AggregationRegistry::builtins());

// Stage-k PageRank over a binary link symbol (global variant). With
// chi_types given, the closure-restricted variant built from those
// conditioning types and the average connective.
FormulaPtr pagerank_formula(int k, const std::string& edge_symbol = "E");
FormulaPtr pagerank_formula(int k, const std::string& edge_symbol,
                            const std::vector<CertPtr>& chi_types);

}  // namespace plastar

#endif  // PLASTAR_FORMULA_HPP
