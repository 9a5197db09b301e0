#ifndef PLASTAR_BOUNDEDNESS_HPP
#define PLASTAR_BOUNDEDNESS_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "plastar/base_sequence.hpp"
#include "plastar/certificate.hpp"

namespace plastar {

// Per-sequence verdict on whether a neighbourhood type has boundedly many
// realizations across the sequence. Analytic for the built-in families with
// known rules; otherwise empirical from the realization counts at the probes
// (constant over the last three probes => Bounded).
struct BoundednessVerdict {
  bool bounded = false;
  std::uint64_t cap = 0;  // witness cap (max observed count) when bounded
  bool analytic = false;  // false marks an empirical verdict
  std::vector<int> probe_sizes;
  std::vector<std::uint64_t> counts;  // realization counts at the probes
};

// Exact count of tuples in B_n realizing the type (exhaustive scan).
// For closure certificates, `rare` must list the radius-rare elements of B_n.
std::uint64_t count_realizations_in(const Structure& s, const TypeCertificate& t,
                                    const std::vector<Element>& rare,
                                    std::uint64_t tuple_budget,
                                    const CanonOptions& canon = {});

// The boundedness oracle for complete neighbourhood types whose anchors all
// lie in one ~p-class (checked; a type spanning several classes is rejected).
// `base_provider`, when given, supplies cached probe structures.
using BaseProvider = std::function<std::shared_ptr<const Structure>(int)>;
BoundednessVerdict classify_boundedness(const BaseSequence& seq,
                                        const TypeCertificate& t,
                                        const std::vector<int>& probes,
                                        std::uint64_t tuple_budget = 20'000'000,
                                        const BaseProvider& base_provider = {});

// Relative-frequency diagnostic |r(B_n)| / |p(B_n)| per probe, where p must
// be the radius restriction of r. Probes where |p(B_n)| = 0 are marked
// invalid. The stabilization flag reports a three-probe plateau.
struct RatioDiagnostic {
  std::vector<int> probe_sizes;
  std::vector<double> ratios;
  std::vector<bool> valid;
  bool stabilized = false;
};
RatioDiagnostic ratio_diagnostic(const BaseSequence& seq, const TypeCertificate& r,
                                 const TypeCertificate& p,
                                 const std::vector<int>& probes,
                                 double stabilization_tol = 0.05,
                                 std::uint64_t tuple_budget = 20'000'000);

}  // namespace plastar

#endif  // PLASTAR_BOUNDEDNESS_HPP
