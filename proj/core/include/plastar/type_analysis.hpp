#ifndef PLASTAR_TYPE_ANALYSIS_HPP
#define PLASTAR_TYPE_ANALYSIS_HPP

#include <map>
#include <set>
#include <memory>
#include <optional>
#include <vector>

#include "plastar/base_sequence.hpp"
#include "plastar/boundedness.hpp"
#include "plastar/certificate.hpp"
#include "plastar/formula.hpp"
#include "plastar/network.hpp"

namespace plastar {

enum class Verdict { Bounded, UniformlyUnbounded, StronglyUnbounded };

struct ClassVerdict {
  std::vector<int> positions;  // anchor positions of the ~p-class
  bool touches_x = false;
  bool near_rare = false;      // within 2*radius of the rare block
  bool bounded = false;        // touches_x or near_rare
};

struct Classification {
  Verdict verdict = Verdict::Bounded;
  std::uint64_t cap = 0;            // witness cap when Bounded (0 if unknown)
  bool cap_known = false;
  int dimension = 0;                // y-dimension
  bool empirical = false;           // some sub-verdict rests on probe counts only
  std::vector<ClassVerdict> classes;
};

struct Decomposition {
  std::vector<int> bounded_positions;    // u: t|x,u is u-bounded
  std::vector<int> unbounded_positions;  // v: t strongly v-unbounded (if nonempty)
};

// A realized type together with the configuration witnessing it; witnesses
// feed the restriction operations.
struct RealizedType {
  CertPtr cert;
  int probe_n = 0;
  Tuple witness;
  std::shared_ptr<const Structure> structure;  // B_n or a sampled world over it
  std::uint64_t count = 0;                     // realizations seen in the scan
};

// Analysis context bound to one base sequence: caches generated structures,
// rare-element sets, boundedness verdicts, certificates and type witnesses.
// The caches make it single-writer: share structures freely across threads,
// but give each worker its own context.
class TypeContext {
 public:
  TypeContext(BaseSequence seq, Config cfg);

  const BaseSequence& sequence() const { return seq_; }
  const Config& config() const { return cfg_; }
  const Signature& tau() const { return seq_.signature(); }

  std::shared_ptr<const Structure> base(int n);

  // Elements of B_n whose single-anchor (tau,lambda)-neighbourhood type the
  // boundedness oracle classifies Bounded. Cached.
  const std::vector<Element>& rare_elements(int n, int lambda);

  // N_lambda(rng(anchors) u rare_elements(n, lambda)).
  std::vector<Element> closure_set(int n, const Tuple& anchors, int lambda);

  // Certificates. S must expand B_n (its tau-reduct is B_n); scope_len counts
  // symbols of S's signature (>= tau length).
  CertPtr neighbourhood_type(const Structure& s, const Tuple& anchors, int lambda,
                             int scope_len);
  CertPtr closure_type(const Structure& s, int n, const Tuple& anchors, int lambda,
                       int scope_len);

  bool satisfies(const Structure& s, int n, const Tuple& tuple,
                 const TypeCertificate& t);

  // Bounded / uniformly unbounded / strongly unbounded classification of a
  // closure type with respect to the anchor positions `y_positions`.
  Classification classify(const TypeCertificate& t,
                          const std::vector<int>& y_positions);

  int dimension(const TypeCertificate& t, const std::vector<int>& y_positions);

  Decomposition decompose(const TypeCertificate& t,
                          const std::vector<int>& y_positions);

  // Restrictions re-derive the certificate from a realizing configuration;
  // they require a witness (from enumeration, satisfaction checks, or
  // register_witness). Missing witness => error.
  CertPtr restrict_anchors(const TypeCertificate& t, const std::vector<int>& keep);
  CertPtr restrict_scope(const TypeCertificate& t, int scope_len);
  CertPtr restrict_radius(const TypeCertificate& t, int gamma);

  // Deduplicated closure types realized by arity-k tuples at the probes.
  // tau-scope types scan the base structures; sigma-scope types scan worlds
  // sampled from `net` (required in that case).
  std::vector<RealizedType> enumerate_realized_types(const std::vector<int>& probes,
                                                     int lambda, int arity,
                                                     int scope_len,
                                                     const PlaNetwork* net = nullptr);

  // Exact realization count of t in B_n (exhaustive tuple scan).
  std::uint64_t count_realizations(int n, const TypeCertificate& t);

  // Boundedness oracle for neighbourhood types, memoized.
  const BoundednessVerdict& boundedness(const TypeCertificate& t);

  // Evaluation environment whose rare provider resolves against B_n.
  EvalEnv env_for(const Structure& s, int n);

  void register_witness(const CertPtr& cert, RealizedType witness);
  std::optional<RealizedType> find_witness(const TypeCertificate& t) const;

  CanonOptions canon_options() const;

 private:
  void compute_cap(const TypeCertificate& t, const std::set<int>& ys,
                   Classification& out);

  BaseSequence seq_;
  Config cfg_;
  std::map<int, std::shared_ptr<const Structure>> bases_;
  std::map<std::pair<int, int>, std::vector<Element>> rare_;  // (n, lambda)
  std::map<std::string, BoundednessVerdict> oracle_memo_;     // by cert bytes
  std::map<std::string, Classification> classify_memo_;       // bytes + y-set
  std::map<std::string, CertPtr> cert_memo_;                  // by scan key
  std::map<std::string, RealizedType> witnesses_;             // by cert bytes
};

}  // namespace plastar

#endif  // PLASTAR_TYPE_ANALYSIS_HPP
