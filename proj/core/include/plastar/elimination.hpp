#ifndef PLASTAR_ELIMINATION_HPP
#define PLASTAR_ELIMINATION_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plastar/basic_formula.hpp"
#include "plastar/formula.hpp"
#include "plastar/network.hpp"
#include "plastar/type_analysis.hpp"

namespace plastar {

// Convergence-testing parameters: per input sequence, points c with limiting
// proportions alpha (nonnegative, summing to 1).
struct CtPoint {
  double value = 0;
  double proportion = 0;
};
struct CtParameters {
  std::vector<std::vector<CtPoint>> inputs;
};

struct CtLimitResult {
  double value = 0;
  double achieved_delta = 0;
  std::uint64_t length = 0;  // sequence length at which evaluation stabilized
};

// Evaluates F on explicit convergence-testing sequences of doubling length
// until consecutive evaluations differ by less than `tolerance`. The leftover
// entries after the floor(alpha*N) allocations go to the largest proportion
// (ties to the smallest point index).
CtLimitResult ct_limit(const AggregationFunction& f, const CtParameters& params,
                       double tolerance, std::uint64_t initial_length = 64,
                       std::uint64_t length_cap = 1ULL << 20);

// A 0/1-valued formula over an explicit variable tuple; the first x_arity
// variables are the anchor part, the rest the aggregated part.
struct TypedFormula {
  FormulaPtr formula;
  std::vector<std::string> vars;
  int x_arity = 0;
};

struct BalanceEstimate {
  std::string p_id, chi_id, q_id;
  double alpha = 0;
  bool exact_bounded = false;
  std::uint64_t numer = 0, denom = 0;  // exact rational in exact-bounded mode
  std::vector<int> probe_sizes;
  std::vector<double> per_probe;
  bool stabilized = false;
  bool positive = false;          // lower confidence edge above the floor
  double lower_confidence = 0;
  int observations = 0;
  std::uint64_t empty_conditions = 0;  // anchors skipped for empty denominator
};

struct ConvergenceEstimate {
  std::string p_id, ptau_id;
  double alpha = 0;
  std::vector<int> probe_sizes;
  std::vector<double> per_probe;
  std::vector<bool> valid;   // probes where the tau-type was realized
  std::vector<bool> exact;   // computed by enumeration rather than sampling
  bool stabilized = false;
  bool eventually_constant = false;
};

struct EquivalenceReport {
  double epsilon = 0;
  std::vector<int> probe_sizes;
  std::vector<double> deviation_fraction;  // worlds with some anchor off by > eps
  bool pass = false;
};

struct CompileReport {
  int level = 0;
  bool all_exact = true;
  std::vector<std::string> lines;
  void note(std::string line) { lines.push_back(std::move(line)); }
  std::string to_string() const;
};

// The elimination pipeline: compiles PLA* formulas into asymptotically
// equivalent basic formulas over a base sequence and network, with exact
// subpaths where the theory licenses them and estimator bookkeeping elsewhere.
class Compiler {
 public:
  Compiler(TypeContext& ctx, const PlaNetwork& net);

  TypeContext& context() { return ctx_; }
  const PlaNetwork& network() const { return net_; }

  // Exact compilation of an aggregation-free formula: cases are the realized
  // complete (sigma,0)-closure types of the variable tuple.
  BasicFormula compile_aggregation_free(const Formula& f,
                                        const std::vector<std::string>& vars);

  // Refines the inputs to the common level max(lambda_i) and applies the
  // connective case-wise. Exact on scanned probes.
  BasicFormula compose_connective(const Connective& conn,
                                  const std::vector<BasicFormula>& inputs,
                                  const std::vector<std::string>& vars);

  // Exact-bounded balance (the countable case): for each realized complete
  // (sigma,xi)-closure type q of the anchor part, the exact ratio
  // |p1 & p2| / |p2| over the aggregated part, constant across q-anchors
  // (asserted). p2's tau-part must be y-bounded.
  std::vector<BalanceEstimate> balance_exact_bounded(const TypedFormula& p1,
                                                     const TypedFormula& p2);

  // Sampled balance of (p, chi, q): mean over worlds and q-anchors of
  // |p & chi| / |chi| over the aggregated part.
  BalanceEstimate balance_estimate(const TypedFormula& p, const TypedFormula& chi,
                                   const TypeCertificate& q);

  // Per-probe conditional probability of the 0/1 formula p given that the
  // anchor satisfies the tau-closure type p_tau (exact by enumeration when
  // the world count fits the budget, sampled otherwise).
  ConvergenceEstimate convergence_estimate(const FormulaPtr& p,
                                           const std::vector<std::string>& vars,
                                           const TypeCertificate& p_tau);

  // The full pipeline; the report lists every estimate with its mode.
  std::pair<BasicFormula, CompileReport> compile(const FormulaPtr& f);

  // Merges cases by value and estimates the probability of landing in each
  // group given p_tau. The betas sum to ~1 within estimator noise.
  std::vector<std::pair<double, ConvergenceEstimate>> value_distribution(
      const BasicFormula& basic, const TypeCertificate& p_tau);

  // Fraction of sampled worlds containing some anchor tuple where the basic
  // formula deviates from f by more than eps, per probe.
  EquivalenceReport check_asymptotic_equivalence(const FormulaPtr& f,
                                                 const BasicFormula& basic,
                                                 double eps);

  CompileReport& report() { return report_; }

 private:
  struct ConditioningInfo;

  std::shared_ptr<const Structure> world(int n, int index);
  BasicFormula compile_node(const FormulaPtr& f, const std::vector<std::string>& vars);
  BasicFormula eliminate_aggregation(const Formula& node,
                                     const std::vector<std::string>& vars);
  ConditioningInfo analyze_conditioning(const FormulaPtr& chi,
                                        const std::vector<std::string>& vars,
                                        const std::vector<std::string>& bound);
  std::vector<RealizedType> realized_sigma_types(int lambda, int arity);
  double eval_formula(const Structure& s, int n, const FormulaPtr& f,
                      const std::vector<std::string>& vars, const Tuple& tuple);

  TypeContext& ctx_;
  const PlaNetwork& net_;
  CompileReport report_;
  std::map<std::pair<int, int>, std::shared_ptr<const Structure>> world_cache_;
};

}  // namespace plastar

#endif  // PLASTAR_ELIMINATION_HPP
