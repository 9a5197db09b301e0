#ifndef PLASTAR_BASIC_FORMULA_HPP
#define PLASTAR_BASIC_FORMULA_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "plastar/type_analysis.hpp"

namespace plastar {

// One case of a basic formula: a complete closure type paired with a value.
struct BasicCase {
  CertPtr type;
  double value = 0;
  bool exact = true;  // exact compilation vs empirically estimated constant
};

// A (sigma, lambda)-basic formula: a case list over pairwise-inequivalent
// closure types of radius <= level. Evaluation returns the first matching
// case's constant and 0 when no case matches; cases are kept sorted by
// certificate bytes so order never carries information.
class BasicFormula {
 public:
  BasicFormula() = default;
  BasicFormula(int level, std::vector<BasicCase> cases);

  int level() const { return level_; }
  int anchor_arity() const;
  const std::vector<BasicCase>& cases() const { return cases_; }
  bool all_exact() const;

  // Index of the first matching case, -1 if none.
  int match(TypeContext& ctx, const Structure& s, int n, const Tuple& anchors) const;
  double evaluate(TypeContext& ctx, const Structure& s, int n,
                  const Tuple& anchors) const;

  // Context-free variant for standalone structures: `rare_provider` supplies
  // the lambda-rare element sets (empty function means no rare elements).
  using RareProvider = std::function<std::vector<Element>(int)>;
  int match(const Structure& s, const RareProvider& rare_provider,
            const CanonOptions& canon, const Tuple& anchors) const;
  double evaluate(const Structure& s, const RareProvider& rare_provider,
                  const CanonOptions& canon, const Tuple& anchors) const;

  // Merges cases with equal constants (tolerance 1e-12), keeping the types.
  std::vector<std::pair<double, std::vector<CertPtr>>> value_groups() const;

  std::string serialize() const;
  static BasicFormula parse(std::istream& in);
  static BasicFormula parse(const std::string& text);

 private:
  int level_ = 0;
  std::vector<BasicCase> cases_;
};

}  // namespace plastar

#endif  // PLASTAR_BASIC_FORMULA_HPP
