#include "plastar/certificate.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <numeric>

namespace plastar {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, size_t& pos) {
  if (pos + 4 > in.size()) throw UserError("certificate bytes truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

std::string get_str(const std::string& in, size_t& pos) {
  std::uint32_t len = get_u32(in, pos);
  if (pos + len > in.size()) throw UserError("certificate bytes truncated");
  std::string s = in.substr(pos, len);
  pos += len;
  return s;
}

std::string encode(const TypeCertificate& t) {
  std::string out;
  out.push_back(t.kind == TypeCertificate::Kind::Closure ? 'C' : 'N');
  put_u32(out, static_cast<std::uint32_t>(t.radius));
  put_u32(out, static_cast<std::uint32_t>(t.anchor_arity));
  put_u32(out, static_cast<std::uint32_t>(t.scope.size()));
  put_u32(out, static_cast<std::uint32_t>(t.scope.tau_prefix_len()));
  for (const auto& sym : t.scope.symbols()) {
    put_str(out, sym.name);
    put_u32(out, static_cast<std::uint32_t>(sym.arity));
  }
  put_u32(out, static_cast<std::uint32_t>(t.config.domain_size()));
  for (Element a : t.anchor_labels) put_u32(out, static_cast<std::uint32_t>(a));
  for (char f : t.rare_flags) out.push_back(f ? '\1' : '\0');
  for (int r = 0; r < t.scope.size(); ++r) {
    put_u32(out, static_cast<std::uint32_t>(t.config.facts(r).size()));
    for (const Tuple& f : t.config.facts(r))
      for (Element e : f) put_u32(out, static_cast<std::uint32_t>(e));
  }
  return out;
}

// Individualization-refinement canonical search. Refinement is 1-WL over the
// relational configuration with integer signatures; at each node the search
// branches on the members of the first non-singleton color class and keeps
// the lexicographically smallest relabeled fact list over all leaves. Branch
// sets are color classes, so the minimum is isomorphism-invariant.
struct CanonSearch {
  struct Incidence {
    int symbol;
    int fact;
    int position;
  };

  const Structure& config;
  std::uint64_t leaf_budget;
  std::uint64_t leaves = 0;
  std::vector<std::vector<Tuple>> best_facts;
  std::vector<Element> best_labels;

  std::vector<const Tuple*> all_facts;   // flattened, with symbol ids
  std::vector<int> fact_symbol;
  std::vector<std::vector<Incidence>> incident;  // per element

  explicit CanonSearch(const Structure& cfg, std::uint64_t budget)
      : config(cfg), leaf_budget(budget) {
    incident.resize(config.domain_size());
    for (int r = 0; r < config.signature().size(); ++r)
      for (const Tuple& f : config.facts(r)) {
        int idx = static_cast<int>(all_facts.size());
        all_facts.push_back(&f);
        fact_symbol.push_back(r);
        for (size_t pos = 0; pos < f.size(); ++pos)
          incident[f[pos]].push_back({r, idx, static_cast<int>(pos)});
      }
  }

  // one refinement pass; returns the number of colors
  int refine(std::vector<int>& color) {
    const int m = config.domain_size();
    int num_colors = 0;
    std::vector<std::vector<int>> key(m);
    for (int round = 0; round <= m; ++round) {
      for (int e = 0; e < m; ++e) {
        auto& k = key[e];
        k.clear();
        k.push_back(color[e]);
        std::vector<std::vector<int>> sigs;
        sigs.reserve(incident[e].size());
        for (const auto& inc : incident[e]) {
          std::vector<int> sig{inc.symbol, inc.position};
          for (Element u : *all_facts[inc.fact]) sig.push_back(color[u]);
          sigs.push_back(std::move(sig));
        }
        std::sort(sigs.begin(), sigs.end());
        for (const auto& sig : sigs) {
          k.push_back(-1);  // separator
          k.insert(k.end(), sig.begin(), sig.end());
        }
      }
      std::vector<int> order(m);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(),
                [&](int a, int b) { return key[a] < key[b]; });
      int next = -1;
      std::vector<int> fresh(m);
      for (int i = 0; i < m; ++i) {
        if (i == 0 || key[order[i]] != key[order[i - 1]]) ++next;
        fresh[order[i]] = next;
      }
      color = std::move(fresh);
      if (next + 1 == num_colors) break;  // partition stabilized
      num_colors = next + 1;
    }
    return num_colors;
  }

  std::vector<std::vector<Tuple>> facts_under(const std::vector<Element>& labels) {
    std::vector<std::vector<Tuple>> relabeled(config.signature().size());
    for (int r = 0; r < config.signature().size(); ++r) {
      for (const Tuple& f : config.facts(r)) {
        Tuple t;
        t.reserve(f.size());
        for (Element e : f) t.push_back(labels[e]);
        relabeled[r].push_back(std::move(t));
      }
      std::sort(relabeled[r].begin(), relabeled[r].end());
    }
    return relabeled;
  }

  void run(std::vector<int> color) {
    refine(color);
    const int m = config.domain_size();
    std::vector<std::vector<Element>> classes(m);
    for (int e = 0; e < m; ++e) classes[color[e]].push_back(e);

    for (const auto& cls : classes) {
      if (cls.size() <= 1) continue;
      // branch on the members of the first non-singleton class
      for (Element e : cls) {
        std::vector<int> next(color);
        for (int u = 0; u < m; ++u)
          if (next[u] >= color[e]) ++next[u];
        next[e] = color[e];  // unique color right below its old class
        run(std::move(next));
      }
      return;
    }

    // all classes singleton: a leaf labeling
    if (++leaves > leaf_budget)
      throw BudgetError("certificate canonicalization guard: search budget " +
                        std::to_string(leaf_budget) + " exceeded");
    std::vector<Element> labels(m);
    for (int e = 0; e < m; ++e) labels[e] = color[e];
    auto facts = facts_under(labels);
    if (best_labels.empty() || facts < best_facts) {
      best_facts = std::move(facts);
      best_labels = std::move(labels);
    }
  }
};

}  // namespace

std::string TypeCertificate::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xf]);
  }
  return out;
}

namespace {

// Connected components of the co-occurrence graph over every fact of every
// symbol (not just tau). No fact spans two such components, so the
// configuration can be canonicalized component by component; branch factors
// then add up instead of multiplying.
std::vector<int> cooccurrence_components(const Structure& config) {
  const int m = config.domain_size();
  std::vector<int> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (int r = 0; r < config.signature().size(); ++r)
    for (const Tuple& f : config.facts(r))
      for (size_t i = 1; i < f.size(); ++i) parent[find(f[i])] = find(f[0]);
  std::vector<int> comp(m, -1);
  int next = 0;
  for (int e = 0; e < m; ++e) {
    int root = find(e);
    if (comp[root] < 0) comp[root] = next++;
    comp[e] = comp[root];
  }
  return comp;
}

}  // namespace

CertPtr make_certificate(const Structure& s, const Tuple& anchors,
                         const std::vector<Element>& element_set,
                         const std::vector<Element>& rare,
                         TypeCertificate::Kind kind, int radius, int scope_len,
                         const CanonOptions& opts) {
  auto sub = s.induced_substructure(element_set);
  Structure config = sub.structure.reduct(scope_len);

  const int m = config.domain_size();
  Tuple anchor_local;
  anchor_local.reserve(anchors.size());
  for (Element a : anchors) {
    Element local = sub.new_of_old.at(a);
    if (local < 0) throw InternalError("anchor missing from its own neighbourhood");
    anchor_local.push_back(local);
  }
  std::vector<char> rare_local(m, 0);
  if (kind == TypeCertificate::Kind::Closure)
    for (Element r : rare)
      if (r >= 0 && r < static_cast<int>(sub.new_of_old.size()) && sub.new_of_old[r] >= 0)
        rare_local[sub.new_of_old[r]] = 1;

  // anchor ranks: distinct anchors in order of first occurrence
  std::vector<int> anchor_rank(m, -1);
  int num_fixed = 0;
  for (Element a : anchor_local)
    if (anchor_rank[a] < 0) anchor_rank[a] = num_fixed++;
  if (m - num_fixed > opts.max_nonanchor)
    throw BudgetError("certificate canonicalization guard: " +
                      std::to_string(m - num_fixed) +
                      " non-anchor elements exceed cap " +
                      std::to_string(opts.max_nonanchor));

  std::vector<int> comp = cooccurrence_components(config);
  int num_comps = m == 0 ? 0 : 1 + *std::max_element(comp.begin(), comp.end());

  struct CanonComponent {
    std::vector<Element> members;          // global (config) elements
    std::vector<Element> labels;           // per member, component-local
    std::vector<std::vector<Tuple>> facts; // canonical, component-local
    std::vector<char> rare;                // by component-local label
    int min_anchor_rank = -1;
    std::string sort_key;
  };
  std::vector<CanonComponent> parts(num_comps);
  for (int e = 0; e < m; ++e) parts[comp[e]].members.push_back(e);

  std::uint64_t leaves_used = 0;
  for (auto& part : parts) {
    auto piece = config.induced_substructure(part.members);
    const int pm = piece.structure.domain_size();
    std::vector<int> color(pm);
    for (int e = 0; e < pm; ++e) {
      Element g = piece.old_of_new[e];
      color[e] = anchor_rank[g] >= 0
                     ? anchor_rank[g]
                     : num_fixed + (rare_local[g] ? 0 : 1);
    }
    CanonSearch search(piece.structure,
                       opts.perm_budget > leaves_used
                           ? opts.perm_budget - leaves_used
                           : 0);
    search.run(std::move(color));
    leaves_used += search.leaves;
    part.labels.assign(pm, 0);
    for (int e = 0; e < pm; ++e) part.labels[e] = search.best_labels[e];
    part.facts = std::move(search.best_facts);
    part.rare.assign(pm, 0);
    for (int e = 0; e < pm; ++e)
      if (rare_local[piece.old_of_new[e]]) part.rare[search.best_labels[e]] = 1;
    for (Element g : part.members)
      if (anchor_rank[g] >= 0 &&
          (part.min_anchor_rank < 0 || anchor_rank[g] < part.min_anchor_rank))
        part.min_anchor_rank = anchor_rank[g];
    // invariant ordering key: anchored components by least anchor rank first,
    // the rest by their canonical shape
    part.sort_key.push_back(part.min_anchor_rank >= 0 ? '\0' : '\1');
    if (part.min_anchor_rank >= 0) {
      part.sort_key.push_back(static_cast<char>(part.min_anchor_rank));
    } else {
      put_u32(part.sort_key, static_cast<std::uint32_t>(pm));
      for (char c : part.rare) part.sort_key.push_back(c);
      for (const auto& symbol_facts : part.facts) {
        put_u32(part.sort_key, static_cast<std::uint32_t>(symbol_facts.size()));
        for (const Tuple& f : symbol_facts)
          for (Element e : f)
            put_u32(part.sort_key, static_cast<std::uint32_t>(e));
      }
    }
  }
  std::stable_sort(parts.begin(), parts.end(),
                   [](const CanonComponent& a, const CanonComponent& b) {
                     return a.sort_key < b.sort_key;
                   });

  // compose the global labeling blockwise
  std::vector<Element> best_labels(m, 0);
  std::vector<std::vector<Tuple>> best_facts(config.signature().size());
  int offset = 0;
  for (const auto& part : parts) {
    for (size_t e = 0; e < part.members.size(); ++e)
      best_labels[part.members[e]] = offset + part.labels[e];
    for (size_t r = 0; r < part.facts.size(); ++r)
      for (const Tuple& f : part.facts[r]) {
        Tuple shifted;
        shifted.reserve(f.size());
        for (Element e : f) shifted.push_back(offset + e);
        best_facts[r].push_back(std::move(shifted));
      }
    offset += static_cast<int>(part.members.size());
  }
  for (auto& symbol_facts : best_facts)
    std::sort(symbol_facts.begin(), symbol_facts.end());

  auto cert = std::make_shared<TypeCertificate>();
  cert->kind = kind;
  cert->radius = radius;
  cert->anchor_arity = static_cast<int>(anchors.size());
  cert->scope = config.signature();
  cert->config = Structure(config.signature(), m, best_facts);
  cert->anchor_labels.reserve(anchor_local.size());
  for (Element a : anchor_local) cert->anchor_labels.push_back(best_labels[a]);
  cert->rare_flags.assign(m, 0);
  for (int e = 0; e < m; ++e)
    if (rare_local[e]) cert->rare_flags[best_labels[e]] = 1;
  cert->bytes = encode(*cert);
  return cert;
}

CertPtr certificate_of(const Structure& s, const Tuple& anchors, int radius,
                       TypeCertificate::Kind kind, int scope_len,
                       const std::vector<Element>& rare,
                       const CanonOptions& opts) {
  std::vector<Element> seeds(anchors.begin(), anchors.end());
  if (kind == TypeCertificate::Kind::Closure)
    seeds.insert(seeds.end(), rare.begin(), rare.end());
  if (seeds.empty() && kind == TypeCertificate::Kind::Neighbourhood)
    throw UserError("neighbourhood certificate requires a nonempty anchor tuple");
  std::vector<Element> set = s.neighbourhood_of_set(seeds, radius);
  return make_certificate(s, anchors, set, rare, kind, radius, scope_len, opts);
}

CertPtr certificate_from_bytes(const std::string& bytes) {
  size_t pos = 0;
  if (bytes.empty()) throw UserError("empty certificate bytes");
  auto cert = std::make_shared<TypeCertificate>();
  cert->kind = bytes[0] == 'C' ? TypeCertificate::Kind::Closure
                               : TypeCertificate::Kind::Neighbourhood;
  pos = 1;
  cert->radius = static_cast<int>(get_u32(bytes, pos));
  cert->anchor_arity = static_cast<int>(get_u32(bytes, pos));
  int nsym = static_cast<int>(get_u32(bytes, pos));
  int tau_len = static_cast<int>(get_u32(bytes, pos));
  std::vector<Signature::Symbol> symbols;
  for (int i = 0; i < nsym; ++i) {
    std::string name = get_str(bytes, pos);
    int arity = static_cast<int>(get_u32(bytes, pos));
    symbols.push_back({std::move(name), arity});
  }
  cert->scope = Signature(std::move(symbols), tau_len);
  int m = static_cast<int>(get_u32(bytes, pos));
  for (int i = 0; i < cert->anchor_arity; ++i)
    cert->anchor_labels.push_back(static_cast<Element>(get_u32(bytes, pos)));
  cert->rare_flags.resize(m);
  for (int i = 0; i < m; ++i) {
    if (pos >= bytes.size()) throw UserError("certificate bytes truncated");
    cert->rare_flags[i] = bytes[pos++] ? 1 : 0;
  }
  std::vector<std::vector<Tuple>> facts(cert->scope.size());
  for (int r = 0; r < cert->scope.size(); ++r) {
    int count = static_cast<int>(get_u32(bytes, pos));
    for (int i = 0; i < count; ++i) {
      Tuple t;
      for (int j = 0; j < cert->scope.symbol(r).arity; ++j)
        t.push_back(static_cast<Element>(get_u32(bytes, pos)));
      facts[r].push_back(std::move(t));
    }
  }
  cert->config = Structure(cert->scope, m, std::move(facts));
  cert->bytes = encode(*cert);
  if (cert->bytes != bytes)
    throw UserError("certificate bytes are not in canonical form");
  return cert;
}

CertPtr certificate_from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw UserError("odd-length certificate hex");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw UserError("invalid certificate hex digit");
  };
  std::string bytes;
  bytes.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2)
    bytes.push_back(static_cast<char>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
  return certificate_from_bytes(bytes);
}

int anchor_distance(const TypeCertificate& t, int pos_a, int pos_b) {
  Element a = t.anchor_labels.at(pos_a);
  Element b = t.anchor_labels.at(pos_b);
  return t.config.dist(a, b);
}

namespace {

// Connected components of the configuration's (tau-level) Gaifman graph.
// Anchors in one component are rigidly placed relative to each other;
// anchors in separate components can be realized at any sufficient mutual
// distance. This refines the paper-level "distance <= 2*lambda" relation:
// two lambda-balls at distance exactly 2*lambda+1 are joined by the middle
// edge of a geodesic, which the configuration records, so component
// structure is the faithful computable ~p.
std::vector<int> config_components(const Structure& config) {
  const int m = config.domain_size();
  std::vector<int> comp(m, -1);
  int next = 0;
  for (int start = 0; start < m; ++start) {
    if (comp[start] >= 0) continue;
    comp[start] = next;
    std::vector<Element> stack{start};
    while (!stack.empty()) {
      Element u = stack.back();
      stack.pop_back();
      for (Element v : config.gaifman_neighbours(u))
        if (comp[v] < 0) {
          comp[v] = next;
          stack.push_back(v);
        }
    }
    ++next;
  }
  return comp;
}

}  // namespace

SimPartition sim_partition(const TypeCertificate& t) {
  const int k = t.anchor_arity;
  SimPartition out;
  out.witness_distance.assign(k, std::vector<int>(k, -1));
  std::vector<int> comp = config_components(t.config);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      int d = anchor_distance(t, i, j);
      if (d != kInfiniteDistance)
        out.witness_distance[i][j] = out.witness_distance[j][i] = d;
    }
  out.block_of.assign(k, -1);
  for (int i = 0; i < k; ++i) {
    int c = comp[t.anchor_labels[i]];
    bool fresh = true;
    for (int j = 0; j < i; ++j)
      if (comp[t.anchor_labels[j]] == c) {
        out.block_of[i] = out.block_of[j];
        out.blocks[out.block_of[i]].push_back(i);
        fresh = false;
        break;
      }
    if (fresh) {
      out.block_of[i] = static_cast<int>(out.blocks.size());
      out.blocks.push_back({i});
    }
  }
  return out;
}

bool block_near_rare(const TypeCertificate& t, const std::vector<int>& positions) {
  if (t.kind != TypeCertificate::Kind::Closure)
    throw InternalError("block_near_rare requires a closure certificate");
  std::vector<int> comp = config_components(t.config);
  for (int pos : positions) {
    int c = comp[t.anchor_labels.at(pos)];
    for (int e = 0; e < t.config.domain_size(); ++e)
      if (t.rare_flags[e] && comp[e] == c) return true;
  }
  return false;
}

}  // namespace plastar
