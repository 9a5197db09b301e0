#ifndef PLASTAR_NETWORK_HPP
#define PLASTAR_NETWORK_HPP

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "plastar/formula.hpp"
#include "plastar/structure.hpp"

namespace plastar {

// A PLA*-network: a DAG over the non-tau symbols of sigma plus a probability
// formula theta_R per symbol, with theta_R's symbols drawn from
// par(R) union tau. Induces a product-form distribution on the expansions of
// a base structure.
class PlaNetwork {
 public:
  // arg_names gives, per non-tau symbol, the variable names standing for the
  // relation's argument positions in theta; when empty they default to the
  // formula's free variables in sorted order (padded with fresh names).
  PlaNetwork(Signature sigma, std::vector<FormulaPtr> theta,
             std::vector<std::vector<int>> parents,
             std::vector<std::vector<std::string>> arg_names = {});

  // The trivial network over sigma = tau.
  static PlaNetwork trivial(Signature tau);

  const Signature& sigma() const { return sigma_; }
  int num_random_symbols() const { return sigma_.size() - sigma_.tau_prefix_len(); }

  // theta, parents and arg_names are indexed by symbol index minus tau length.
  const FormulaPtr& theta(int symbol_index) const;
  const std::vector<int>& parents(int symbol_index) const;  // symbol indices
  const std::vector<std::string>& arg_names(int symbol_index) const;

  // Longest directed path length of the DAG; -1 when sigma = tau, 0 for a
  // nonempty edgeless DAG.
  int mp_rank() const;
  int mp(int symbol_index) const;  // stratum of a non-tau symbol

  // Non-tau symbol indices ordered by (stratum, signature order).
  std::vector<int> topological_symbols() const;

  // Induced subnetwork on a parent-closed symbol subset (indices into sigma,
  // must contain the whole tau prefix).
  PlaNetwork subnetwork(const std::vector<int>& symbol_indices) const;

  // The subnetwork on tau and all symbols of stratum <= r.
  PlaNetwork stratum_subnetwork(int r) const;

  std::string id() const;  // stable digest of the definition

 private:
  Signature sigma_;
  std::vector<FormulaPtr> theta_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<std::string>> arg_names_;
  std::vector<int> mp_;  // per non-tau symbol
};

struct World {
  Structure structure;
  std::uint64_t seed = 0;
  std::string network_id;
};

struct ProbabilityEstimate {
  double estimate = 0;
  int samples = 0;
  double radius = 0;      // two-sided Hoeffding radius
  double confidence = 0;  // the level the radius was computed for
};

// Probability the network assigns to the world (product over symbols and
// tuples). theta values are evaluated on the world itself; by reduct
// insensitivity this equals evaluation on the (par(R) union tau)-reduct.
double world_probability(const PlaNetwork& net, const Structure& world,
                         std::uint64_t tuple_budget = 20'000'000);

// Enumerates every expansion of `base` with its probability. Errors when the
// world count exceeds the budget. Probabilities sum to 1 (up to 1e-9; tested).
void for_each_world(const PlaNetwork& net, const Structure& base,
                    std::uint64_t budget,
                    const std::function<void(const Structure&, double)>& fn,
                    std::uint64_t tuple_budget = 20'000'000);

// Exact probability of a 0/1-valued event via enumeration.
double exact_probability(const PlaNetwork& net, const Structure& base,
                         const Formula& event, const Assignment& at,
                         std::uint64_t budget,
                         std::uint64_t tuple_budget = 20'000'000);

// Forward sampling: symbols are processed stratum by stratum; each tuple is
// included independently with the probability theta_R takes on the lower
// stratum. Per-(symbol, tuple) streams are derived from the seed by hashing,
// so the outcome is independent of evaluation order.
World sample_world(const PlaNetwork& net, const Structure& base,
                   std::uint64_t seed, std::uint64_t tuple_budget = 20'000'000);

// Monte Carlo estimate of P(event = 1) with a Hoeffding confidence radius.
// Aborts if a sampled world gives the event a value other than 0 or 1.
ProbabilityEstimate estimate_probability(const PlaNetwork& net, const Structure& base,
                                         const Formula& event, const Assignment& at,
                                         int samples, std::uint64_t seed,
                                         double confidence = 0.95, int jobs = 1,
                                         std::uint64_t tuple_budget = 20'000'000);

// Text format:
//   sigma E/2 R/1 | tau=1
//   prob R(x): 0.3
//   parents R: E         (optional; narrows the derived parent set)
PlaNetwork parse_network(std::istream& in,
                         const ConnectiveRegistry& conns = ConnectiveRegistry::builtins(),
                         const AggregationRegistry& aggs = AggregationRegistry::builtins());
PlaNetwork parse_network(const std::string& text,
                         const ConnectiveRegistry& conns = ConnectiveRegistry::builtins(),
                         const AggregationRegistry& aggs = AggregationRegistry::builtins());
std::string serialize_network(const PlaNetwork& net);

}  // namespace plastar

#endif  // PLASTAR_NETWORK_HPP
