#ifndef PLASTAR_STRUCTURE_HPP
#define PLASTAR_STRUCTURE_HPP

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "plastar/common.hpp"

namespace plastar {

// A finite relational signature. The first tau_prefix_len symbols form the
// base signature tau; tau is always an initial segment of sigma.
class Signature {
 public:
  struct Symbol {
    std::string name;
    int arity = 1;
  };

  Signature() = default;
  Signature(std::vector<Symbol> symbols, int tau_prefix_len);

  const std::vector<Symbol>& symbols() const { return symbols_; }
  int size() const { return static_cast<int>(symbols_.size()); }
  int tau_prefix_len() const { return tau_prefix_len_; }
  const Symbol& symbol(int i) const { return symbols_.at(i); }
  bool is_tau(int i) const { return i < tau_prefix_len_; }

  // Index of a symbol by name, or nullopt.
  std::optional<int> index_of(const std::string& name) const;

  // A prefix of this signature (k symbols, same tau length). k >= tau len.
  Signature prefix(int k) const;

  bool operator==(const Signature& other) const;
  bool operator!=(const Signature& other) const { return !(*this == other); }

  std::string to_string() const;  // "R/2 Q/1 | tau=1"

 private:
  std::vector<Symbol> symbols_;
  int tau_prefix_len_ = 0;
};

// A finite relational structure with domain {0, ..., domain_size-1}.
// Immutable after construction; the Gaifman adjacency of the tau-reduct is
// built eagerly so concurrent readers never contend.
class Structure {
 public:
  Structure() = default;
  Structure(Signature sig, int domain_size);
  Structure(Signature sig, int domain_size,
            std::vector<std::vector<Tuple>> facts);

  const Signature& signature() const { return sig_; }
  int domain_size() const { return n_; }

  // Process-unique id, fresh per construction (copies share content, so a
  // copied id stays a valid cache key). Used to memoize certificates.
  std::uint64_t uid() const { return uid_; }

  // Sorted, deduplicated fact list of one symbol.
  const std::vector<Tuple>& facts(int symbol) const { return facts_.at(symbol); }
  bool holds(int symbol, const Tuple& t) const;

  // Gaifman adjacency of the tau-reduct: a and b adjacent iff a != b and they
  // co-occur in some tau-relation fact.
  const std::vector<Element>& gaifman_neighbours(Element a) const;

  int degree() const;  // max Gaifman-neighbour count; 0 for no edges

  // BFS distance in the Gaifman graph of the tau-reduct; kInfiniteDistance if
  // disconnected. `cutoff`, when given, stops the search beyond that radius
  // (returning kInfiniteDistance for anything farther).
  int dist(Element a, Element b, int cutoff = -1) const;
  int dist_tuples(const Tuple& a, const Tuple& b) const;

  // All elements within distance <= radius of some entry of `anchors`.
  // Sorted. Requires anchors nonempty.
  std::vector<Element> neighbourhood(const Tuple& anchors, int radius) const;

  // Like neighbourhood but seeded with anchors plus an extra element set
  // (used for closures); the seed set may make `anchors` empty.
  std::vector<Element> neighbourhood_of_set(const std::vector<Element>& seeds,
                                            int radius) const;

  struct Substructure;
  // Substructure induced by `subset` (facts with all entries inside), with the
  // renaming maps so anchored tuples can be tracked across extraction.
  Substructure induced_substructure(const std::vector<Element>& subset) const;

  // Same domain, relations outside the first `prefix_len` symbols dropped.
  Structure reduct(int prefix_len) const;
  Structure reduct_tau() const { return reduct(sig_.tau_prefix_len()); }

  bool operator==(const Structure& other) const;
  bool operator!=(const Structure& other) const { return !(*this == other); }

  void check_element(Element a) const;

 private:
  void build_gaifman();

  static std::uint64_t next_uid();

  Signature sig_;
  std::uint64_t uid_ = next_uid();
  int n_ = 0;
  std::vector<std::vector<Tuple>> facts_;        // per symbol, sorted unique
  std::vector<std::set<Tuple>> fact_index_;      // membership lookups
  std::vector<std::vector<Element>> gaifman_;    // sorted adjacency lists
};

struct Structure::Substructure {
  Structure structure;
  std::vector<Element> old_of_new;   // new label -> original element
  std::vector<Element> new_of_old;   // original -> new label, -1 if dropped
};

// Line-oriented text format:
//   signature R/2 Q/1 | tau=1
//   domain 5
//   R 0 1
//   # comment
// Parsing is whitespace-tolerant; serialization is canonical (facts sorted)
// so serialize(parse(serialize(s))) is byte-identical to serialize(s).
Signature parse_signature_header(const std::string& line,
                                 const std::string& keyword = "signature");
Structure parse_structure(std::istream& in);
Structure parse_structure(const std::string& text);
std::string serialize_structure(const Structure& s);

}  // namespace plastar

#endif  // PLASTAR_STRUCTURE_HPP
