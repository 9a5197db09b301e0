#include "plastar/network.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <istream>
#include <set>
#include <sstream>

namespace plastar {

namespace {

// Symbols occurring in a formula (relation atoms only).
void collect_symbols(const Formula& f, std::set<std::string>& out) {
  if (f.kind() == NodeKind::Atom) out.insert(f.symbol());
  if (f.kind() == NodeKind::TypeAtom)
    for (const auto& sym : f.type()->scope.symbols()) out.insert(sym.name);
  for (const auto& s : f.subs()) collect_symbols(*s, out);
  for (const auto& s : f.values()) collect_symbols(*s, out);
  for (const auto& s : f.conditions()) collect_symbols(*s, out);
}

std::vector<Tuple> all_tuples(int n, int arity) {
  std::vector<Tuple> out;
  Tuple t(arity, 0);
  if (n == 0) return out;
  while (true) {
    out.push_back(t);
    int pos = arity - 1;
    while (pos >= 0) {
      if (++t[pos] < n) break;
      t[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return out;
}

}  // namespace

PlaNetwork::PlaNetwork(Signature sigma, std::vector<FormulaPtr> theta,
                       std::vector<std::vector<int>> parents,
                       std::vector<std::vector<std::string>> arg_names)
    : sigma_(std::move(sigma)),
      theta_(std::move(theta)),
      parents_(std::move(parents)),
      arg_names_(std::move(arg_names)) {
  const int tau = sigma_.tau_prefix_len();
  const int m = sigma_.size() - tau;
  if (static_cast<int>(theta_.size()) != m || static_cast<int>(parents_.size()) != m)
    throw UserError("network: need one probability formula per non-tau symbol");
  if (arg_names_.empty()) arg_names_.resize(m);
  if (static_cast<int>(arg_names_.size()) != m)
    throw UserError("network: need one argument-name list per non-tau symbol");

  for (int i = 0; i < m; ++i) {
    const int sym = tau + i;
    if (!theta_[i])
      throw UserError("network: missing probability formula for " +
                      sigma_.symbol(sym).name);
    const int arity = sigma_.symbol(sym).arity;
    if (arg_names_[i].empty()) {
      arg_names_[i] = theta_[i]->free_vars();  // sorted already
      int fresh = 0;
      while (static_cast<int>(arg_names_[i].size()) < arity)
        arg_names_[i].push_back("_x" + std::to_string(fresh++));
    }
    if (static_cast<int>(arg_names_[i].size()) != arity)
      throw UserError("network: argument-name list for " + sigma_.symbol(sym).name +
                      " must match the relation's arity");
    for (const auto& v : theta_[i]->free_vars())
      if (std::find(arg_names_[i].begin(), arg_names_[i].end(), v) ==
          arg_names_[i].end())
        throw UserError("network: theta for " + sigma_.symbol(sym).name +
                        " uses undeclared variable " + v);
    std::set<std::string> used;
    collect_symbols(*theta_[i], used);
    for (const auto& name : used) {
      auto idx = sigma_.index_of(name);
      if (!idx)
        throw UserError("network: theta for " + sigma_.symbol(sym).name +
                        " uses unknown symbol " + name);
      if (*idx < tau) continue;  // tau symbols are always allowed
      if (std::find(parents_[i].begin(), parents_[i].end(), *idx) ==
          parents_[i].end())
        throw UserError("network: theta for " + sigma_.symbol(sym).name +
                        " uses symbol " + name + " outside par(R) u tau");
      if (*idx == sym)
        throw UserError("network: " + sigma_.symbol(sym).name + " depends on itself");
    }
    for (int p : parents_[i])
      if (p < tau || p >= sigma_.size())
        throw UserError("network: parent index out of range");
  }

  // strata via longest path from the roots; also rejects cycles
  mp_.assign(m, -2);
  std::function<int(int)> rank = [&](int i) -> int {
    if (mp_[i] == -3) throw UserError("network: dependency cycle through " +
                                      sigma_.symbol(tau + i).name);
    if (mp_[i] >= 0) return mp_[i];
    mp_[i] = -3;
    int best = 0;
    for (int p : parents_[i]) best = std::max(best, rank(p - tau) + 1);
    mp_[i] = best;
    return best;
  };
  for (int i = 0; i < m; ++i) rank(i);
}

PlaNetwork PlaNetwork::trivial(Signature tau) {
  if (tau.tau_prefix_len() != tau.size())
    throw UserError("trivial network requires sigma = tau");
  return PlaNetwork(std::move(tau), {}, {});
}

const FormulaPtr& PlaNetwork::theta(int symbol_index) const {
  return theta_.at(symbol_index - sigma_.tau_prefix_len());
}

const std::vector<int>& PlaNetwork::parents(int symbol_index) const {
  return parents_.at(symbol_index - sigma_.tau_prefix_len());
}

const std::vector<std::string>& PlaNetwork::arg_names(int symbol_index) const {
  return arg_names_.at(symbol_index - sigma_.tau_prefix_len());
}

int PlaNetwork::mp_rank() const {
  if (mp_.empty()) return -1;
  return *std::max_element(mp_.begin(), mp_.end());
}

int PlaNetwork::mp(int symbol_index) const {
  return mp_.at(symbol_index - sigma_.tau_prefix_len());
}

std::vector<int> PlaNetwork::topological_symbols() const {
  std::vector<int> order;
  const int tau = sigma_.tau_prefix_len();
  for (int r = 0; r <= mp_rank(); ++r)
    for (int i = 0; i < static_cast<int>(mp_.size()); ++i)
      if (mp_[i] == r) order.push_back(tau + i);
  return order;
}

PlaNetwork PlaNetwork::subnetwork(const std::vector<int>& symbol_indices) const {
  const int tau = sigma_.tau_prefix_len();
  std::set<int> keep(symbol_indices.begin(), symbol_indices.end());
  for (int i = 0; i < tau; ++i)
    if (!keep.count(i)) throw UserError("subnetwork must keep the whole tau prefix");
  for (int s : keep) {
    if (s < 0 || s >= sigma_.size()) throw UserError("subnetwork: bad symbol index");
    if (s >= tau)
      for (int p : parents_[s - tau])
        if (!keep.count(p))
          throw UserError("subnetwork: " + sigma_.symbol(s).name +
                          "'s parent " + sigma_.symbol(p).name + " is missing");
  }
  std::vector<Signature::Symbol> symbols;
  std::vector<int> new_of_old(sigma_.size(), -1);
  for (int s = 0; s < sigma_.size(); ++s)
    if (keep.count(s)) {
      new_of_old[s] = static_cast<int>(symbols.size());
      symbols.push_back(sigma_.symbol(s));
    }
  Signature sub_sig(std::move(symbols), tau);
  std::vector<FormulaPtr> theta;
  std::vector<std::vector<int>> parents;
  std::vector<std::vector<std::string>> names;
  for (int s = tau; s < sigma_.size(); ++s) {
    if (!keep.count(s)) continue;
    theta.push_back(theta_[s - tau]);
    names.push_back(arg_names_[s - tau]);
    std::vector<int> ps;
    for (int p : parents_[s - tau]) ps.push_back(new_of_old[p]);
    parents.push_back(std::move(ps));
  }
  return PlaNetwork(std::move(sub_sig), std::move(theta), std::move(parents),
                    std::move(names));
}

PlaNetwork PlaNetwork::stratum_subnetwork(int r) const {
  std::vector<int> keep;
  const int tau = sigma_.tau_prefix_len();
  for (int i = 0; i < tau; ++i) keep.push_back(i);
  for (int i = 0; i < static_cast<int>(mp_.size()); ++i)
    if (mp_[i] <= r) keep.push_back(tau + i);
  return subnetwork(keep);
}

std::string PlaNetwork::id() const {
  std::uint64_t h = 0x9d3f;
  std::string text = serialize_network(*this);
  for (char c : text) h = hash_combine(h, static_cast<unsigned char>(c));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double world_probability(const PlaNetwork& net, const Structure& world,
                         std::uint64_t tuple_budget) {
  const Signature& sigma = net.sigma();
  if (world.signature() != sigma)
    throw UserError("world signature does not match the network");
  EvalEnv env;
  env.structure = &world;
  env.tuple_budget = tuple_budget;
  double prob = 1.0;
  for (int s = sigma.tau_prefix_len(); s < sigma.size(); ++s) {
    const auto& theta = *net.theta(s);
    const auto& args = net.arg_names(s);
    for (const Tuple& t : all_tuples(world.domain_size(), sigma.symbol(s).arity)) {
      Assignment at;
      for (size_t i = 0; i < args.size(); ++i) at.emplace_back(args[i], t[i]);
      double p = evaluate(env, theta, at);
      prob *= world.holds(s, t) ? p : 1.0 - p;
      if (prob == 0.0) return 0.0;
    }
  }
  return prob;
}

void for_each_world(const PlaNetwork& net, const Structure& base,
                    std::uint64_t budget,
                    const std::function<void(const Structure&, double)>& fn,
                    std::uint64_t tuple_budget) {
  const Signature& sigma = net.sigma();
  if (base.signature() != sigma.prefix(sigma.tau_prefix_len()))
    throw UserError("base structure signature does not match the network's tau");

  const int n = base.domain_size();
  std::vector<std::vector<Tuple>> slots;  // per non-tau symbol
  double total = 1;
  for (int s = sigma.tau_prefix_len(); s < sigma.size(); ++s) {
    slots.push_back(all_tuples(n, sigma.symbol(s).arity));
    total *= std::pow(2.0, static_cast<double>(slots.back().size()));
    if (total > static_cast<double>(budget))
      throw BudgetError("exact enumeration of " + format_double(total) +
                        " worlds exceeds budget " + std::to_string(budget));
  }

  std::vector<std::vector<bool>> mask(slots.size());
  for (size_t i = 0; i < slots.size(); ++i) mask[i].assign(slots[i].size(), false);

  auto build = [&]() {
    std::vector<std::vector<Tuple>> facts(sigma.size());
    for (int s = 0; s < sigma.tau_prefix_len(); ++s) facts[s] = base.facts(s);
    for (size_t i = 0; i < slots.size(); ++i)
      for (size_t j = 0; j < slots[i].size(); ++j)
        if (mask[i][j]) facts[sigma.tau_prefix_len() + i].push_back(slots[i][j]);
    return Structure(sigma, n, std::move(facts));
  };

  while (true) {
    Structure world = build();
    fn(world, world_probability(net, world, tuple_budget));
    // advance the odometer over all (symbol, tuple) inclusion bits
    size_t i = 0, j = 0;
    bool carried = true;
    for (i = 0; i < mask.size() && carried; ++i)
      for (j = 0; j < mask[i].size() && carried; ++j) {
        carried = mask[i][j];
        mask[i][j] = !mask[i][j];
      }
    if (carried) break;  // wrapped all bits
  }
}

double exact_probability(const PlaNetwork& net, const Structure& base,
                         const Formula& event, const Assignment& at,
                         std::uint64_t budget, std::uint64_t tuple_budget) {
  double total = 0;
  for_each_world(
      net, base, budget,
      [&](const Structure& world, double p) {
        EvalEnv env;
        env.structure = &world;
        env.tuple_budget = tuple_budget;
        double v = evaluate(env, event, at);
        if (v != 0.0 && v != 1.0)
          throw UserError("event formula is not 0/1-valued on a world (value " +
                          format_double(v) + ")");
        if (v == 1.0) total += p;
      },
      tuple_budget);
  return total;
}

World sample_world(const PlaNetwork& net, const Structure& base,
                   std::uint64_t seed, std::uint64_t tuple_budget) {
  const Signature& sigma = net.sigma();
  if (base.signature() != sigma.prefix(sigma.tau_prefix_len()))
    throw UserError("base structure signature does not match the network's tau");
  const int n = base.domain_size();

  std::vector<std::vector<Tuple>> facts(sigma.size());
  for (int s = 0; s < sigma.tau_prefix_len(); ++s) facts[s] = base.facts(s);

  int prev_rank = 0;
  Structure lower(sigma, n, facts);  // strata below the one being sampled
  for (int s : net.topological_symbols()) {
    if (net.mp(s) != prev_rank) {
      lower = Structure(sigma, n, facts);
      prev_rank = net.mp(s);
    }
    EvalEnv env;
    env.structure = &lower;
    env.tuple_budget = tuple_budget;
    const auto& theta = *net.theta(s);
    const auto& args = net.arg_names(s);
    for (const Tuple& t : all_tuples(n, sigma.symbol(s).arity)) {
      Assignment at;
      for (size_t i = 0; i < args.size(); ++i) at.emplace_back(args[i], t[i]);
      double p = evaluate(env, theta, at);
      if (p < -1e-9 || p > 1.0 + 1e-9)
        throw InternalError("theta value outside [0,1]");
      std::uint64_t h = hash_combine(seed, static_cast<std::uint64_t>(s));
      for (Element e : t) h = hash_combine(h, static_cast<std::uint64_t>(e));
      if (unit_uniform(h) < p) facts[s].push_back(t);
    }
  }
  World w;
  w.structure = Structure(sigma, n, std::move(facts));
  w.seed = seed;
  w.network_id = net.id();
  return w;
}

ProbabilityEstimate estimate_probability(const PlaNetwork& net, const Structure& base,
                                         const Formula& event, const Assignment& at,
                                         int samples, std::uint64_t seed,
                                         double confidence, int jobs,
                                         std::uint64_t tuple_budget) {
  if (samples < 1) throw UserError("estimate needs at least one sample");
  if (is_01_valued(event) == ZeroOne::Unknown) {
    // allowed, but every sampled evaluation must still come out 0/1
  }
  auto run = [&](int lo, int hi) {
    int hits = 0;
    for (int i = lo; i < hi; ++i) {
      World w = sample_world(net, base, hash_combine(seed, i), tuple_budget);
      EvalEnv env;
      env.structure = &w.structure;
      env.tuple_budget = tuple_budget;
      double v = evaluate(env, event, at);
      if (v != 0.0 && v != 1.0)
        throw UserError("event formula is not 0/1-valued on a sampled world");
      hits += v == 1.0 ? 1 : 0;
    }
    return hits;
  };

  int hits = 0;
  if (jobs <= 1) {
    hits = run(0, samples);
  } else {
    std::vector<std::future<int>> futures;
    int chunk = (samples + jobs - 1) / jobs;
    for (int lo = 0; lo < samples; lo += chunk)
      futures.push_back(std::async(std::launch::async, run, lo,
                                   std::min(samples, lo + chunk)));
    for (auto& f : futures) hits += f.get();
  }

  ProbabilityEstimate est;
  est.samples = samples;
  est.estimate = static_cast<double>(hits) / samples;
  est.confidence = confidence;
  double delta = 1.0 - confidence;
  est.radius = std::sqrt(std::log(2.0 / delta) / (2.0 * samples));
  return est;
}

PlaNetwork parse_network(std::istream& in, const ConnectiveRegistry& conns,
                         const AggregationRegistry& aggs) {
  std::string line;
  std::optional<Signature> sigma;
  std::vector<FormulaPtr> theta;
  std::vector<std::vector<std::string>> arg_decls;
  std::vector<std::vector<std::string>> declared_parents;
  std::vector<bool> narrowed;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string head;
    if (!(ss >> head)) continue;
    if (head == "sigma") {
      sigma = parse_signature_header(line, "sigma");
      theta.assign(sigma->size() - sigma->tau_prefix_len(), nullptr);
      arg_decls.assign(theta.size(), {});
      declared_parents.assign(theta.size(), {});
      narrowed.assign(theta.size(), false);
    } else if (head == "prob") {
      if (!sigma) throw UserError("network: prob line before sigma header");
      std::string rest;
      std::getline(ss, rest);
      auto colon = rest.find(':');
      if (colon == std::string::npos)
        throw UserError("network: malformed prob line: " + line);
      std::string decl = rest.substr(0, colon);
      std::string ftext = rest.substr(colon + 1);
      auto paren = decl.find('(');
      std::string name = decl.substr(0, paren);
      name.erase(std::remove_if(name.begin(), name.end(), ::isspace), name.end());
      auto idx = sigma->index_of(name);
      if (!idx || *idx < sigma->tau_prefix_len())
        throw UserError("network: prob line for unknown or tau symbol '" + name + "'");
      FormulaPtr f = parse_formula(ftext, *sigma, conns, aggs);
      // the declared argument variables pin the free-variable order
      if (paren != std::string::npos) {
        std::string args = decl.substr(paren + 1);
        if (!args.empty() && args.back() == ')') args.pop_back();
        std::vector<std::string> names;
        std::string cur;
        for (char c : args + ",") {
          if (c == ',') {
            if (!cur.empty()) names.push_back(cur);
            cur.clear();
          } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
          }
        }
        if (static_cast<int>(names.size()) != sigma->symbol(*idx).arity)
          throw UserError("network: prob declaration for " + name +
                          " has wrong arity");
        arg_decls[*idx - sigma->tau_prefix_len()] = names;
      }
      theta[*idx - sigma->tau_prefix_len()] = std::move(f);
    } else if (head == "parents") {
      if (!sigma) throw UserError("network: parents line before sigma header");
      std::string name;
      ss >> name;
      if (!name.empty() && name.back() == ':') name.pop_back();
      auto idx = sigma->index_of(name);
      if (!idx || *idx < sigma->tau_prefix_len())
        throw UserError("network: parents line for unknown symbol '" + name + "'");
      std::string p;
      auto& list = declared_parents[*idx - sigma->tau_prefix_len()];
      narrowed[*idx - sigma->tau_prefix_len()] = true;
      while (ss >> p) list.push_back(p);
    } else {
      throw UserError("network: unrecognized line: " + line);
    }
  }
  if (!sigma) throw UserError("network: missing sigma header");

  const int tau = sigma->tau_prefix_len();
  std::vector<std::vector<int>> parents(theta.size());
  for (size_t i = 0; i < theta.size(); ++i) {
    if (!theta[i])
      throw UserError("network: missing prob line for " +
                      sigma->symbol(tau + static_cast<int>(i)).name);
    if (narrowed[i]) {
      for (const auto& name : declared_parents[i]) {
        auto idx = sigma->index_of(name);
        if (!idx || *idx < tau)
          throw UserError("network: parent '" + name + "' is not a non-tau symbol");
        parents[i].push_back(*idx);
      }
    } else {
      // derived from symbol occurrences in theta
      std::set<std::string> used;
      collect_symbols(*theta[i], used);
      for (const auto& name : used) {
        auto idx = sigma->index_of(name);
        if (idx && *idx >= tau) parents[i].push_back(*idx);
      }
    }
    std::sort(parents[i].begin(), parents[i].end());
  }
  return PlaNetwork(*sigma, std::move(theta), std::move(parents),
                    std::move(arg_decls));
}

PlaNetwork parse_network(const std::string& text, const ConnectiveRegistry& conns,
                         const AggregationRegistry& aggs) {
  std::istringstream ss(text);
  return parse_network(ss, conns, aggs);
}

std::string serialize_network(const PlaNetwork& net) {
  const Signature& sigma = net.sigma();
  std::string out = "sigma " + sigma.to_string() + "\n";
  for (int s = sigma.tau_prefix_len(); s < sigma.size(); ++s) {
    const auto& theta = *net.theta(s);
    out += "prob " + sigma.symbol(s).name + "(";
    const auto& args = net.arg_names(s);
    for (int i = 0; i < sigma.symbol(s).arity; ++i) {
      out += i ? ", " : "";
      out += args[i];
    }
    out += "): " + theta.print() + "\n";
    if (!net.parents(s).empty()) {
      out += "parents " + sigma.symbol(s).name + ":";
      for (int p : net.parents(s)) out += " " + sigma.symbol(p).name;
      out += "\n";
    }
  }
  return out;
}

}  // namespace plastar
