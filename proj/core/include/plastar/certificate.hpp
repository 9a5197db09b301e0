#ifndef PLASTAR_CERTIFICATE_HPP
#define PLASTAR_CERTIFICATE_HPP

#include <memory>
#include <string>
#include <vector>

#include "plastar/structure.hpp"

namespace plastar {

// Canonical anchored isomorphism type of a lambda-neighbourhood or
// lambda-closure. Two tuples receive equal certificates exactly when there is
// an isomorphism of the induced configurations mapping anchors to anchors
// pointwise and, for closures, the rare block onto the rare block.
//
// Satisfaction is certificate equality; the `bytes` field is the identity and
// doubles as the serialization (hex-encoded in files and CLI output).
struct TypeCertificate {
  enum class Kind { Neighbourhood, Closure };

  Kind kind = Kind::Neighbourhood;
  int radius = 0;
  int anchor_arity = 0;
  Signature scope;

  // Canonically labeled configuration. Anchors occupy the first labels (in
  // order of first occurrence); anchor_labels has length anchor_arity and
  // encodes the equality pattern among anchors.
  Structure config;
  Tuple anchor_labels;
  std::vector<char> rare_flags;  // per config element; all 0 for neighbourhoods

  std::string bytes;

  bool operator==(const TypeCertificate& o) const { return bytes == o.bytes; }
  bool operator!=(const TypeCertificate& o) const { return bytes != o.bytes; }

  std::string hex() const;
};

using CertPtr = std::shared_ptr<const TypeCertificate>;

struct CanonOptions {
  int max_nonanchor = 64;
  std::uint64_t perm_budget = 1'000'000;
};

// Builds the certificate of `anchors` in S over the given element set
// (a lambda-neighbourhood or lambda-closure of the anchors computed by the
// caller). `rare` lists the rare elements of S contained in the set; pass an
// empty vector for neighbourhood certificates. `scope_len` restricts the
// configuration to a signature prefix (>= tau length).
CertPtr make_certificate(const Structure& s, const Tuple& anchors,
                         const std::vector<Element>& element_set,
                         const std::vector<Element>& rare,
                         TypeCertificate::Kind kind, int radius, int scope_len,
                         const CanonOptions& opts = {});

// Convenience wrapper computing the element set itself: the radius-
// neighbourhood of the anchors (kind Neighbourhood), or of anchors plus the
// supplied rare set (kind Closure).
CertPtr certificate_of(const Structure& s, const Tuple& anchors, int radius,
                       TypeCertificate::Kind kind, int scope_len,
                       const std::vector<Element>& rare = {},
                       const CanonOptions& opts = {});

// Decodes a certificate from its canonical byte string (or hex form).
CertPtr certificate_from_bytes(const std::string& bytes);
CertPtr certificate_from_hex(const std::string& hex);

// Partition of anchor positions into the ~p blocks: anchors share a block
// exactly when they lie in one connected component of the configuration
// (which is the transitive closure of "the lambda-balls interact", the
// computable form of the <= 2*lambda distance relation). witness_distance
// records the in-config distance for connected pairs, -1 otherwise.
struct SimPartition {
  std::vector<int> block_of;                 // anchor position -> block id
  std::vector<std::vector<int>> blocks;      // block id -> positions
  std::vector<std::vector<int>> witness_distance;
};
SimPartition sim_partition(const TypeCertificate& t);

// Config-level distance between two anchor positions (kInfiniteDistance when
// disconnected inside the configuration). Faithful to the distance in the
// ambient structure up to 2*radius.
int anchor_distance(const TypeCertificate& t, int pos_a, int pos_b);

// True when the anchor block `positions` shares a configuration component
// with a rare-flagged element (closure kinds only); such a block is pinned,
// so its restriction is a bounded type.
bool block_near_rare(const TypeCertificate& t, const std::vector<int>& positions);

}  // namespace plastar

#endif  // PLASTAR_CERTIFICATE_HPP
