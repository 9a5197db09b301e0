#ifndef PLASTAR_BASE_SEQUENCE_HPP
#define PLASTAR_BASE_SEQUENCE_HPP

#include <string>
#include <vector>

#include "plastar/structure.hpp"

namespace plastar {

// A generator for the base sequence (B_n). Every generated structure has
// Gaifman degree at most degree_bound(), and generate is pure given
// (family, seed, n).
class BaseSequence {
 public:
  enum class Family { EmptySet, UnaryRare, Path, Grid, BoundedTree };

  static BaseSequence empty_set();
  static BaseSequence unary_rare(int symbols, int max_marked);
  static BaseSequence path();
  static BaseSequence grid(int dim);
  static BaseSequence bounded_tree(int delta, std::vector<double> offspring_weights,
                                   std::uint64_t seed,
                                   std::uint64_t retry_cap = 1'000'000);

  // CLI-facing descriptors: "path", "set", "grid:d=2", "unary:s=2,m=3",
  // "tree:delta=3,seed=7,weights=0.3/0.4/0.2/0.1".
  static BaseSequence from_descriptor(const std::string& text);
  std::string descriptor() const;

  Family family() const { return family_; }
  int degree_bound() const;
  const Signature& signature() const { return sig_; }

  Structure generate(int n) const;

  // Family-specific helpers used by the analytic boundedness rules.
  bool analytic_family() const { return family_ != Family::BoundedTree; }
  int grid_dim() const { return grid_dim_; }
  int unary_symbols() const { return unary_symbols_; }
  int unary_max_marked() const { return unary_max_; }
  std::uint64_t seed() const { return seed_; }

  // Distance from an element to the nearest grid corner (Grid family only).
  int grid_corner_distance(int n, Element a) const;

 private:
  BaseSequence() = default;
  Structure generate_tree(int n) const;

  Family family_ = Family::Path;
  Signature sig_;
  int unary_symbols_ = 0;
  int unary_max_ = 0;
  int grid_dim_ = 2;
  int tree_delta_ = 0;
  std::vector<double> tree_weights_;
  std::uint64_t seed_ = 0;
  std::uint64_t retry_cap_ = 1'000'000;
};

}  // namespace plastar

#endif  // PLASTAR_BASE_SEQUENCE_HPP
