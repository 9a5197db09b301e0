#include "plastar/structure.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <deque>
#include <istream>
#include <sstream>
#include <unordered_set>

namespace plastar {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Signature::Signature(std::vector<Symbol> symbols, int tau_prefix_len)
    : symbols_(std::move(symbols)), tau_prefix_len_(tau_prefix_len) {
  if (tau_prefix_len_ < 0 || tau_prefix_len_ > static_cast<int>(symbols_.size()))
    throw UserError("signature: tau prefix length out of range");
  std::unordered_set<std::string> seen;
  for (const auto& s : symbols_) {
    if (s.arity < 1) throw UserError("signature: arity of " + s.name + " must be >= 1");
    if (s.name.empty()) throw UserError("signature: empty symbol name");
    if (!seen.insert(s.name).second)
      throw UserError("signature: duplicate symbol " + s.name);
  }
}

std::optional<int> Signature::index_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (symbols_[i].name == name) return i;
  return std::nullopt;
}

Signature Signature::prefix(int k) const {
  if (k < tau_prefix_len_ || k > size())
    throw UserError("signature: invalid prefix length " + std::to_string(k));
  return Signature(std::vector<Symbol>(symbols_.begin(), symbols_.begin() + k),
                   tau_prefix_len_);
}

bool Signature::operator==(const Signature& other) const {
  if (tau_prefix_len_ != other.tau_prefix_len_ || size() != other.size())
    return false;
  for (int i = 0; i < size(); ++i)
    if (symbols_[i].name != other.symbols_[i].name ||
        symbols_[i].arity != other.symbols_[i].arity)
      return false;
  return true;
}

std::string Signature::to_string() const {
  std::string out;
  for (const auto& s : symbols_) {
    if (!out.empty()) out += ' ';
    out += s.name + "/" + std::to_string(s.arity);
  }
  if (!out.empty()) out += ' ';
  out += "| tau=" + std::to_string(tau_prefix_len_);
  return out;
}

std::uint64_t Structure::next_uid() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

Structure::Structure(Signature sig, int domain_size)
    : Structure(std::move(sig), domain_size, {}) {}

Structure::Structure(Signature sig, int domain_size,
                     std::vector<std::vector<Tuple>> facts)
    : sig_(std::move(sig)), n_(domain_size) {
  if (n_ < 0) throw UserError("structure: negative domain size");
  facts.resize(sig_.size());
  facts_.resize(sig_.size());
  fact_index_.resize(sig_.size());
  for (int r = 0; r < sig_.size(); ++r) {
    const int arity = sig_.symbol(r).arity;
    for (auto& t : facts[r]) {
      if (static_cast<int>(t.size()) != arity)
        throw UserError("structure: fact arity mismatch for " + sig_.symbol(r).name);
      for (Element e : t) check_element(e);
      fact_index_[r].insert(t);
    }
    facts_[r].assign(fact_index_[r].begin(), fact_index_[r].end());
  }
  build_gaifman();
}

void Structure::check_element(Element a) const {
  if (a < 0 || a >= n_)
    throw UserError("element " + std::to_string(a) + " outside domain of size " +
                    std::to_string(n_));
}

bool Structure::holds(int symbol, const Tuple& t) const {
  return fact_index_.at(symbol).count(t) > 0;
}

void Structure::build_gaifman() {
  std::vector<std::set<Element>> adj(n_);
  for (int r = 0; r < sig_.tau_prefix_len(); ++r) {
    for (const Tuple& t : facts_[r]) {
      for (size_t i = 0; i < t.size(); ++i)
        for (size_t j = i + 1; j < t.size(); ++j)
          if (t[i] != t[j]) {
            adj[t[i]].insert(t[j]);
            adj[t[j]].insert(t[i]);
          }
    }
  }
  gaifman_.resize(n_);
  for (int a = 0; a < n_; ++a) gaifman_[a].assign(adj[a].begin(), adj[a].end());
}

const std::vector<Element>& Structure::gaifman_neighbours(Element a) const {
  check_element(a);
  return gaifman_[a];
}

int Structure::degree() const {
  size_t best = 0;
  for (const auto& row : gaifman_) best = std::max(best, row.size());
  return static_cast<int>(best);
}

int Structure::dist(Element a, Element b, int cutoff) const {
  check_element(a);
  check_element(b);
  if (a == b) return 0;
  // plain BFS; radii are small constants in all callers
  std::vector<int> d(n_, -1);
  d[a] = 0;
  std::deque<Element> queue{a};
  while (!queue.empty()) {
    Element u = queue.front();
    queue.pop_front();
    if (cutoff >= 0 && d[u] >= cutoff) continue;
    for (Element v : gaifman_[u]) {
      if (d[v] >= 0) continue;
      d[v] = d[u] + 1;
      if (v == b) return d[v];
      queue.push_back(v);
    }
  }
  return kInfiniteDistance;
}

int Structure::dist_tuples(const Tuple& a, const Tuple& b) const {
  if (a.empty() || b.empty())
    throw UserError("dist_tuples: tuples must be nonempty");
  int best = kInfiniteDistance;
  for (Element x : a)
    for (Element y : b) best = std::min(best, dist(x, y, best == kInfiniteDistance ? -1 : best));
  return best;
}

std::vector<Element> Structure::neighbourhood_of_set(
    const std::vector<Element>& seeds, int radius) const {
  std::vector<int> d(n_, -1);
  std::deque<Element> queue;
  for (Element a : seeds) {
    check_element(a);
    if (d[a] < 0) {
      d[a] = 0;
      queue.push_back(a);
    }
  }
  std::vector<Element> out;
  while (!queue.empty()) {
    Element u = queue.front();
    queue.pop_front();
    out.push_back(u);
    if (d[u] >= radius) continue;
    for (Element v : gaifman_[u]) {
      if (d[v] >= 0) continue;
      d[v] = d[u] + 1;
      queue.push_back(v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Element> Structure::neighbourhood(const Tuple& anchors,
                                              int radius) const {
  if (anchors.empty()) throw UserError("neighbourhood: empty anchor tuple");
  return neighbourhood_of_set(anchors, radius);
}

Structure::Substructure Structure::induced_substructure(
    const std::vector<Element>& subset) const {
  Substructure out;
  out.new_of_old.assign(n_, -1);
  std::vector<Element> sorted(subset);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (Element a : sorted) {
    check_element(a);
    out.new_of_old[a] = static_cast<Element>(out.old_of_new.size());
    out.old_of_new.push_back(a);
  }
  std::vector<std::vector<Tuple>> facts(sig_.size());
  for (int r = 0; r < sig_.size(); ++r) {
    for (const Tuple& t : facts_[r]) {
      Tuple renamed;
      renamed.reserve(t.size());
      bool inside = true;
      for (Element e : t) {
        if (out.new_of_old[e] < 0) {
          inside = false;
          break;
        }
        renamed.push_back(out.new_of_old[e]);
      }
      if (inside) facts[r].push_back(std::move(renamed));
    }
  }
  out.structure = Structure(sig_, static_cast<int>(out.old_of_new.size()),
                            std::move(facts));
  return out;
}

Structure Structure::reduct(int prefix_len) const {
  Signature sub = sig_.prefix(prefix_len);
  std::vector<std::vector<Tuple>> facts(facts_.begin(),
                                        facts_.begin() + prefix_len);
  return Structure(std::move(sub), n_, std::move(facts));
}

bool Structure::operator==(const Structure& other) const {
  return sig_ == other.sig_ && n_ == other.n_ && facts_ == other.facts_;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

Signature parse_signature_header(const std::string& line,
                                 const std::string& keyword) {
  auto toks = split_ws(line);
  if (toks.empty() || toks[0] != keyword)
    throw UserError("expected '" + keyword + "' header, got: " + line);
  std::vector<Signature::Symbol> symbols;
  int tau_len = -1;
  for (size_t i = 1; i < toks.size(); ++i) {
    if (toks[i] == "|") continue;
    if (toks[i].rfind("tau=", 0) == 0) {
      tau_len = std::stoi(toks[i].substr(4));
      continue;
    }
    auto slash = toks[i].find('/');
    if (slash == std::string::npos)
      throw UserError("malformed symbol declaration '" + toks[i] +
                      "' (expected name/arity)");
    symbols.push_back(
        {toks[i].substr(0, slash), std::stoi(toks[i].substr(slash + 1))});
  }
  if (tau_len < 0) throw UserError("missing tau=k in header: " + line);
  return Signature(std::move(symbols), tau_len);
}

Structure parse_structure(std::istream& in) {
  std::string line;
  std::optional<Signature> sig;
  int domain = -1;
  std::vector<std::vector<Tuple>> facts;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "signature") {
      sig = parse_signature_header(line);
      facts.assign(sig->size(), {});
    } else if (toks[0] == "domain") {
      if (toks.size() != 2) throw UserError("malformed domain line: " + line);
      domain = std::stoi(toks[1]);
    } else {
      if (!sig) throw UserError("fact before signature header: " + line);
      auto idx = sig->index_of(toks[0]);
      if (!idx) throw UserError("unknown relation symbol '" + toks[0] + "'");
      Tuple t;
      for (size_t i = 1; i < toks.size(); ++i)
        t.push_back(static_cast<Element>(std::stol(toks[i])));
      facts[*idx].push_back(std::move(t));
    }
  }
  if (!sig) throw UserError("structure text: missing signature header");
  if (domain < 0) throw UserError("structure text: missing domain line");
  return Structure(*sig, domain, std::move(facts));
}

Structure parse_structure(const std::string& text) {
  std::istringstream ss(text);
  return parse_structure(ss);
}

std::string serialize_structure(const Structure& s) {
  std::string out = "signature " + s.signature().to_string() + "\n";
  out += "domain " + std::to_string(s.domain_size()) + "\n";
  for (int r = 0; r < s.signature().size(); ++r) {
    for (const Tuple& t : s.facts(r)) {
      out += s.signature().symbol(r).name;
      for (Element e : t) out += ' ' + std::to_string(e);
      out += '\n';
    }
  }
  return out;
}

}  // namespace plastar
