#include "plastar/basic_formula.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

namespace plastar {

BasicFormula::BasicFormula(int level, std::vector<BasicCase> cases)
    : level_(level), cases_(std::move(cases)) {
  if (level_ < 0) throw UserError("basic formula level must be >= 0");
  for (const auto& c : cases_) {
    if (!c.type) throw UserError("basic formula case without a type");
    if (c.type->radius > level_)
      throw UserError("basic formula case radius exceeds the level");
    if (!(c.value >= 0.0 && c.value <= 1.0))
      throw UserError("basic formula case value outside [0,1]");
  }
  std::sort(cases_.begin(), cases_.end(), [](const BasicCase& a, const BasicCase& b) {
    return a.type->bytes < b.type->bytes;
  });
  for (size_t i = 1; i < cases_.size(); ++i) {
    if (cases_[i].type->bytes == cases_[i - 1].type->bytes)
      throw UserError("basic formula cases must be pairwise inequivalent");
    if (cases_[i].type->anchor_arity != cases_[0].type->anchor_arity)
      throw UserError("basic formula cases must share anchor arity");
  }
}

int BasicFormula::anchor_arity() const {
  return cases_.empty() ? 0 : cases_[0].type->anchor_arity;
}

bool BasicFormula::all_exact() const {
  for (const auto& c : cases_)
    if (!c.exact) return false;
  return true;
}

int BasicFormula::match(TypeContext& ctx, const Structure& s, int n,
                        const Tuple& anchors) const {
  // one (memoized) certificate per distinct (kind, radius, scope)
  std::map<std::tuple<int, int, int>, const std::string*> seen;
  std::vector<CertPtr> computed;
  for (size_t i = 0; i < cases_.size(); ++i) {
    const TypeCertificate& t = *cases_[i].type;
    auto key = std::make_tuple(static_cast<int>(t.kind), t.radius, t.scope.size());
    auto it = seen.find(key);
    if (it == seen.end()) {
      CertPtr here = t.kind == TypeCertificate::Kind::Closure
                         ? ctx.closure_type(s, n, anchors, t.radius, t.scope.size())
                         : ctx.neighbourhood_type(s, anchors, t.radius,
                                                  t.scope.size());
      computed.push_back(here);
      it = seen.emplace(key, &computed.back()->bytes).first;
    }
    if (*it->second == t.bytes) return static_cast<int>(i);
  }
  return -1;
}

double BasicFormula::evaluate(TypeContext& ctx, const Structure& s, int n,
                              const Tuple& anchors) const {
  int idx = match(ctx, s, n, anchors);
  return idx < 0 ? 0.0 : cases_[idx].value;
}

int BasicFormula::match(const Structure& s, const RareProvider& rare_provider,
                        const CanonOptions& canon, const Tuple& anchors) const {
  // one certificate per distinct (kind, radius, scope) among the cases
  std::map<std::tuple<int, int, int>, std::string> cert_memo;
  for (size_t i = 0; i < cases_.size(); ++i) {
    const TypeCertificate& t = *cases_[i].type;
    auto key = std::make_tuple(static_cast<int>(t.kind), t.radius, t.scope.size());
    auto it = cert_memo.find(key);
    if (it == cert_memo.end()) {
      std::vector<Element> rare;
      if (t.kind == TypeCertificate::Kind::Closure && rare_provider)
        rare = rare_provider(t.radius);
      CertPtr here =
          certificate_of(s, anchors, t.radius, t.kind, t.scope.size(), rare, canon);
      it = cert_memo.emplace(key, here->bytes).first;
    }
    if (it->second == t.bytes) return static_cast<int>(i);
  }
  return -1;
}

double BasicFormula::evaluate(const Structure& s, const RareProvider& rare_provider,
                              const CanonOptions& canon, const Tuple& anchors) const {
  int idx = match(s, rare_provider, canon, anchors);
  return idx < 0 ? 0.0 : cases_[idx].value;
}

std::vector<std::pair<double, std::vector<CertPtr>>> BasicFormula::value_groups()
    const {
  std::vector<std::pair<double, std::vector<CertPtr>>> groups;
  for (const auto& c : cases_) {
    bool placed = false;
    for (auto& [v, types] : groups)
      if (std::fabs(v - c.value) <= kValueTolerance) {
        types.push_back(c.type);
        placed = true;
        break;
      }
    if (!placed) groups.push_back({c.value, {c.type}});
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  return groups;
}

std::string BasicFormula::serialize() const {
  std::string out = "basic level=" + std::to_string(level_) + "\n";
  for (const auto& c : cases_) {
    out += "case " + c.type->hex() + " -> " + format_double(c.value) +
           " # mode=" + (c.exact ? "exact" : "empirical") + "\n";
  }
  return out;
}

BasicFormula BasicFormula::parse(std::istream& in) {
  std::string line;
  int level = -1;
  std::vector<BasicCase> cases;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string head;
    if (!(ss >> head)) continue;
    if (head == "basic") {
      std::string lv;
      ss >> lv;
      if (lv.rfind("level=", 0) != 0)
        throw UserError("basic formula: malformed header: " + line);
      level = std::stoi(lv.substr(6));
    } else if (head == "case") {
      std::string hex, arrow, value;
      ss >> hex >> arrow >> value;
      if (arrow != "->") throw UserError("basic formula: malformed case: " + line);
      BasicCase c;
      c.type = certificate_from_hex(hex);
      c.value = std::stod(value);
      c.exact = line.find("mode=exact") != std::string::npos;
      cases.push_back(std::move(c));
    } else if (head.rfind("#", 0) == 0) {
      continue;
    } else {
      throw UserError("basic formula: unrecognized line: " + line);
    }
  }
  if (level < 0) throw UserError("basic formula: missing header");
  return BasicFormula(level, std::move(cases));
}

BasicFormula BasicFormula::parse(const std::string& text) {
  std::istringstream ss(text);
  return parse(ss);
}

}  // namespace plastar
