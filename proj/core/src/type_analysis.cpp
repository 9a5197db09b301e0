#include "plastar/type_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace plastar {

TypeContext::TypeContext(BaseSequence seq, Config cfg)
    : seq_(std::move(seq)), cfg_(std::move(cfg)) {
  if (cfg_.probes.empty() || !std::is_sorted(cfg_.probes.begin(), cfg_.probes.end()))
    throw UserError("config probes must be a nonempty increasing list");
}

CanonOptions TypeContext::canon_options() const {
  return {cfg_.canon_max_nonanchor, cfg_.canon_perm_budget};
}

std::shared_ptr<const Structure> TypeContext::base(int n) {
  auto it = bases_.find(n);
  if (it != bases_.end()) return it->second;
  auto s = std::make_shared<const Structure>(seq_.generate(n));
  bases_.emplace(n, s);
  return s;
}

const std::vector<Element>& TypeContext::rare_elements(int n, int lambda) {
  auto key = std::make_pair(n, lambda);
  auto it = rare_.find(key);
  if (it != rare_.end()) return it->second;

  auto b = base(n);
  std::vector<Element> rare;
  std::map<std::string, bool> local;  // cert bytes -> bounded
  for (Element a = 0; a < b->domain_size(); ++a) {
    CertPtr t = certificate_of(*b, {a}, lambda, TypeCertificate::Kind::Neighbourhood,
                               tau().size(), {}, canon_options());
    auto lit = local.find(t->bytes);
    bool bounded;
    if (lit != local.end()) {
      bounded = lit->second;
    } else {
      bounded = boundedness(*t).bounded;
      local.emplace(t->bytes, bounded);
    }
    if (bounded) rare.push_back(a);
  }
  return rare_.emplace(key, std::move(rare)).first->second;
}

const BoundednessVerdict& TypeContext::boundedness(const TypeCertificate& t) {
  auto it = oracle_memo_.find(t.bytes);
  if (it != oracle_memo_.end()) return it->second;
  BoundednessVerdict v =
      classify_boundedness(seq_, t, cfg_.probes, cfg_.tuple_budget,
                           [this](int n) { return base(n); });
  return oracle_memo_.emplace(t.bytes, std::move(v)).first->second;
}

std::vector<Element> TypeContext::closure_set(int n, const Tuple& anchors,
                                              int lambda) {
  auto b = base(n);
  std::vector<Element> seeds(anchors.begin(), anchors.end());
  const auto& rare = rare_elements(n, lambda);
  seeds.insert(seeds.end(), rare.begin(), rare.end());
  if (seeds.empty()) return {};
  return b->neighbourhood_of_set(seeds, lambda);
}

namespace {

// The memo holds shared certificates keyed by (structure uid, query); worlds
// sampled in long batch runs would otherwise grow it without bound.
constexpr size_t kCertMemoCap = 1u << 20;

std::string cert_key(const Structure& s, const Tuple& anchors, int lambda,
                     TypeCertificate::Kind kind, int scope_len) {
  std::string key;
  key.reserve(anchors.size() * 4 + 24);
  key += std::to_string(s.uid());
  key.push_back(kind == TypeCertificate::Kind::Closure ? 'C' : 'N');
  key += std::to_string(lambda);
  key.push_back('/');
  key += std::to_string(scope_len);
  for (Element a : anchors) {
    key.push_back(',');
    key += std::to_string(a);
  }
  return key;
}

}  // namespace

CertPtr TypeContext::neighbourhood_type(const Structure& s, const Tuple& anchors,
                                        int lambda, int scope_len) {
  std::string key = cert_key(s, anchors, lambda,
                             TypeCertificate::Kind::Neighbourhood, scope_len);
  if (auto it = cert_memo_.find(key); it != cert_memo_.end()) return it->second;
  CertPtr c = certificate_of(s, anchors, lambda,
                             TypeCertificate::Kind::Neighbourhood, scope_len, {},
                             canon_options());
  if (cert_memo_.size() >= kCertMemoCap) cert_memo_.clear();
  cert_memo_.emplace(std::move(key), c);
  return c;
}

CertPtr TypeContext::closure_type(const Structure& s, int n, const Tuple& anchors,
                                  int lambda, int scope_len) {
  std::string key =
      cert_key(s, anchors, lambda, TypeCertificate::Kind::Closure, scope_len);
  if (auto it = cert_memo_.find(key); it != cert_memo_.end()) return it->second;
  const auto& rare = rare_elements(n, lambda);
  CertPtr c = certificate_of(s, anchors, lambda, TypeCertificate::Kind::Closure,
                             scope_len, rare, canon_options());
  if (cert_memo_.size() >= kCertMemoCap) cert_memo_.clear();
  cert_memo_.emplace(std::move(key), c);
  return c;
}

bool TypeContext::satisfies(const Structure& s, int n, const Tuple& tuple,
                            const TypeCertificate& t) {
  if (static_cast<int>(tuple.size()) != t.anchor_arity)
    throw UserError("satisfies: tuple arity " + std::to_string(tuple.size()) +
                    " does not match anchor arity " +
                    std::to_string(t.anchor_arity));
  CertPtr here = t.kind == TypeCertificate::Kind::Closure
                     ? closure_type(s, n, tuple, t.radius, t.scope.size())
                     : neighbourhood_type(s, tuple, t.radius, t.scope.size());
  bool match = here->bytes == t.bytes;
  if (match && !witnesses_.count(t.bytes) && bases_.count(n) &&
      bases_[n].get() == &s) {
    RealizedType w;
    w.cert = here;
    w.probe_n = n;
    w.witness = tuple;
    w.structure = bases_[n];
    register_witness(here, std::move(w));
  }
  return match;
}

Classification TypeContext::classify(const TypeCertificate& t,
                                     const std::vector<int>& y_positions) {
  if (t.kind != TypeCertificate::Kind::Closure)
    throw UserError("classification is defined for closure types");
  std::set<int> ys(y_positions.begin(), y_positions.end());
  for (int y : ys)
    if (y < 0 || y >= t.anchor_arity)
      throw UserError("classify: y-position out of range");
  std::string memo_key = t.bytes + "|";
  for (int y : ys) memo_key += std::to_string(y) + ",";
  if (auto it = classify_memo_.find(memo_key); it != classify_memo_.end())
    return it->second;

  Classification out;
  out.empirical = !seq_.analytic_family();
  SimPartition part = sim_partition(t);

  // Per-class sub-verdicts. A class restriction is bounded exactly when the
  // class sits within distance 2*radius of the rare block (pinning it), and
  // a class touching the x-part never counts against y-boundedness.
  bool all_bounded = true;
  for (const auto& block : part.blocks) {
    ClassVerdict cv;
    cv.positions = block;
    for (int pos : block)
      if (!ys.count(pos)) cv.touches_x = true;
    cv.near_rare = block_near_rare(t, block);
    cv.bounded = cv.touches_x || cv.near_rare;
    bool meets_y = false;
    for (int pos : block) meets_y |= ys.count(pos) > 0;
    if (meets_y && !cv.bounded) all_bounded = false;
    out.classes.push_back(std::move(cv));
  }

  for (const auto& cv : out.classes) {
    if (cv.touches_x || cv.near_rare) continue;
    bool inside_y = true;
    for (int pos : cv.positions) inside_y &= ys.count(pos) > 0;
    if (inside_y) ++out.dimension;
  }

  if (all_bounded) {
    out.verdict = Verdict::Bounded;
    compute_cap(t, ys, out);
    classify_memo_.emplace(memo_key, out);
    return out;
  }

  out.verdict = Verdict::UniformlyUnbounded;
  bool strongly = true;
  for (const auto& cv : out.classes) {
    bool has_x = false, has_y = false;
    for (int pos : cv.positions) (ys.count(pos) ? has_y : has_x) = true;
    if (has_x && has_y) strongly = false;
  }
  for (int y : ys)
    if (block_near_rare(t, {y})) strongly = false;
  if (strongly) out.verdict = Verdict::StronglyUnbounded;
  classify_memo_.emplace(memo_key, out);
  return out;
}

// Largest per-anchor realization count of the tau-part observed at the probes
// whose scans fit the budget.
void TypeContext::compute_cap(const TypeCertificate& t, const std::set<int>& ys,
                              Classification& out) {
  CertPtr tau_part;
  try {
    tau_part = restrict_scope(t, tau().size());
  } catch (const UserError&) {
    return;  // no witness cached; cap stays unknown
  }
  for (int n : cfg_.probes) {
    auto b = base(n);
    const int nn = b->domain_size();
    double scan = std::pow(static_cast<double>(nn), t.anchor_arity);
    if (scan > 50'000 || nn == 0) break;  // cap evidence is desk-scale only
    std::map<Tuple, std::uint64_t> per_anchor;
    Tuple tup(t.anchor_arity, 0);
    while (true) {
      if (satisfies(*b, n, tup, *tau_part)) {
        Tuple x_part;
        for (int i = 0; i < t.anchor_arity; ++i)
          if (!ys.count(i)) x_part.push_back(tup[i]);
        ++per_anchor[x_part];
      }
      int pos = t.anchor_arity - 1;
      while (pos >= 0) {
        if (++tup[pos] < nn) break;
        tup[pos] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
    for (const auto& [x, c] : per_anchor) out.cap = std::max(out.cap, c);
    out.cap_known = true;
  }
}

int TypeContext::dimension(const TypeCertificate& t,
                           const std::vector<int>& y_positions) {
  // read off the tau-part block structure; sigma facts never affect blocks
  return classify(t, y_positions).dimension;
}

Decomposition TypeContext::decompose(const TypeCertificate& t,
                                     const std::vector<int>& y_positions) {
  Classification cls = classify(t, y_positions);
  SimPartition part = sim_partition(t);
  Decomposition out;
  for (int y : y_positions) {
    const ClassVerdict& cv = cls.classes[part.block_of[y]];
    if (cv.bounded)
      out.bounded_positions.push_back(y);
    else
      out.unbounded_positions.push_back(y);
  }
  return out;
}

CertPtr TypeContext::restrict_anchors(const TypeCertificate& t,
                                      const std::vector<int>& keep) {
  auto w = find_witness(t);
  if (!w)
    throw UserError("restriction requires a witness structure; none cached");
  Tuple sub;
  for (int pos : keep) sub.push_back(w->witness.at(pos));
  if (t.kind == TypeCertificate::Kind::Closure)
    return closure_type(*w->structure, w->probe_n, sub, t.radius, t.scope.size());
  return neighbourhood_type(*w->structure, sub, t.radius, t.scope.size());
}

CertPtr TypeContext::restrict_scope(const TypeCertificate& t, int scope_len) {
  if (scope_len == t.scope.size()) return std::make_shared<TypeCertificate>(t);
  auto w = find_witness(t);
  if (!w)
    throw UserError("restriction requires a witness structure; none cached");
  if (t.kind == TypeCertificate::Kind::Closure)
    return closure_type(*w->structure, w->probe_n, w->witness, t.radius, scope_len);
  return neighbourhood_type(*w->structure, w->witness, t.radius, scope_len);
}

CertPtr TypeContext::restrict_radius(const TypeCertificate& t, int gamma) {
  if (gamma > t.radius)
    throw UserError("radius restriction must not exceed the type's radius");
  if (gamma == t.radius) return std::make_shared<TypeCertificate>(t);
  auto w = find_witness(t);
  if (!w)
    throw UserError("restriction requires a witness structure; none cached");
  if (t.kind == TypeCertificate::Kind::Closure)
    return closure_type(*w->structure, w->probe_n, w->witness, gamma, t.scope.size());
  return neighbourhood_type(*w->structure, w->witness, gamma, t.scope.size());
}

std::vector<RealizedType> TypeContext::enumerate_realized_types(
    const std::vector<int>& probes, int lambda, int arity, int scope_len,
    const PlaNetwork* net) {
  const bool sigma_scope = scope_len > tau().size();
  if (sigma_scope && !net)
    throw UserError("enumerating sigma-scope types requires a network");
  std::map<std::string, RealizedType> found;
  std::uint64_t scanned = 0;
  for (int n : probes) {
    auto b = base(n);
    std::vector<std::shared_ptr<const Structure>> structures;
    if (!sigma_scope) {
      structures.push_back(b);
    } else {
      for (int i = 0; i < cfg_.worlds_per_probe; ++i) {
        std::uint64_t seed =
            hash_combine(hash_combine(cfg_.seed, 0xe17),
                         hash_combine(static_cast<std::uint64_t>(n),
                                      static_cast<std::uint64_t>(i)));
        World w = sample_world(*net, *b, seed, cfg_.tuple_budget);
        structures.push_back(
            std::make_shared<const Structure>(std::move(w.structure)));
      }
    }
    for (const auto& sp : structures) {
      const Structure& s = *sp;
      const int nn = s.domain_size();
      double total = std::pow(static_cast<double>(nn), arity);
      scanned += static_cast<std::uint64_t>(total);
      if (scanned > cfg_.tuple_budget)
        throw BudgetError("type enumeration exceeds the tuple budget of " +
                          std::to_string(cfg_.tuple_budget));
      if (nn == 0) continue;
      Tuple tup(arity, 0);
      while (true) {
        CertPtr c = closure_type(s, n, tup, lambda, scope_len);
        auto it = found.find(c->bytes);
        if (it == found.end()) {
          RealizedType r;
          r.cert = c;
          r.probe_n = n;
          r.witness = tup;
          r.structure = sp;
          r.count = 1;
          register_witness(c, r);
          found.emplace(c->bytes, std::move(r));
        } else {
          ++it->second.count;
        }
        int pos = arity - 1;
        while (pos >= 0) {
          if (++tup[pos] < nn) break;
          tup[pos] = 0;
          --pos;
        }
        if (pos < 0) break;
      }
    }
  }
  std::vector<RealizedType> out;
  for (auto& [bytes, r] : found) out.push_back(std::move(r));
  return out;  // ordered by certificate bytes via the map
}

std::uint64_t TypeContext::count_realizations(int n, const TypeCertificate& t) {
  auto b = base(n);
  static const std::vector<Element> kNoRare;
  const std::vector<Element>* rare = &kNoRare;
  if (t.kind == TypeCertificate::Kind::Closure)
    rare = &rare_elements(n, t.radius);
  return count_realizations_in(*b, t, *rare, cfg_.tuple_budget, canon_options());
}

EvalEnv TypeContext::env_for(const Structure& s, int n) {
  EvalEnv env;
  env.structure = &s;
  env.tuple_budget = cfg_.tuple_budget;
  env.rare_provider = [this, n](int lambda) { return rare_elements(n, lambda); };
  env.cert_provider = [this, n](const Structure& str, const Tuple& anchors,
                                int lambda, TypeCertificate::Kind kind,
                                int scope_len) {
    return kind == TypeCertificate::Kind::Closure
               ? closure_type(str, n, anchors, lambda, scope_len)
               : neighbourhood_type(str, anchors, lambda, scope_len);
  };
  return env;
}

void TypeContext::register_witness(const CertPtr& cert, RealizedType witness) {
  if (!witnesses_.count(cert->bytes))
    witnesses_.emplace(cert->bytes, std::move(witness));
}

std::optional<RealizedType> TypeContext::find_witness(
    const TypeCertificate& t) const {
  auto it = witnesses_.find(t.bytes);
  if (it == witnesses_.end()) return std::nullopt;
  return it->second;
}

}  // namespace plastar
