#include "plastar/base_sequence.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace plastar {

namespace {

Signature edge_signature() { return Signature({{"E", 2}}, 1); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

BaseSequence BaseSequence::empty_set() {
  BaseSequence seq;
  seq.family_ = Family::EmptySet;
  seq.sig_ = Signature({}, 0);
  return seq;
}

BaseSequence BaseSequence::unary_rare(int symbols, int max_marked) {
  if (symbols < 1 || max_marked < 0)
    throw UserError("unary family needs s >= 1 and m >= 0");
  BaseSequence seq;
  seq.family_ = Family::UnaryRare;
  seq.unary_symbols_ = symbols;
  seq.unary_max_ = max_marked;
  std::vector<Signature::Symbol> syms;
  for (int i = 1; i <= symbols; ++i) syms.push_back({"P" + std::to_string(i), 1});
  seq.sig_ = Signature(std::move(syms), symbols);
  return seq;
}

BaseSequence BaseSequence::path() {
  BaseSequence seq;
  seq.family_ = Family::Path;
  seq.sig_ = edge_signature();
  return seq;
}

BaseSequence BaseSequence::grid(int dim) {
  if (dim < 1) throw UserError("grid dimension must be >= 1");
  BaseSequence seq;
  seq.family_ = Family::Grid;
  seq.grid_dim_ = dim;
  seq.sig_ = edge_signature();
  return seq;
}

BaseSequence BaseSequence::bounded_tree(int delta, std::vector<double> weights,
                                        std::uint64_t seed, std::uint64_t retry_cap) {
  if (delta < 1) throw UserError("tree family needs delta >= 1");
  if (static_cast<int>(weights.size()) != delta + 1)
    throw UserError("tree family needs delta+1 offspring weights c0..c_delta");
  double sum = 0;
  for (double w : weights) {
    if (w < 0) throw UserError("offspring weights must be nonnegative");
    sum += w;
  }
  if (sum <= 0) throw UserError("offspring weights must not all be zero");
  for (double& w : weights) w /= sum;
  BaseSequence seq;
  seq.family_ = Family::BoundedTree;
  seq.tree_delta_ = delta;
  seq.tree_weights_ = std::move(weights);
  seq.seed_ = seed;
  seq.retry_cap_ = retry_cap;
  seq.sig_ = edge_signature();
  return seq;
}

int BaseSequence::degree_bound() const {
  switch (family_) {
    case Family::EmptySet:
    case Family::UnaryRare:
      return 0;
    case Family::Path:
      return 2;
    case Family::Grid:
      return 2 * grid_dim_;
    case Family::BoundedTree:
      return tree_delta_ + 1;
  }
  return 0;
}

Structure BaseSequence::generate(int n) const {
  if (n < 1) throw UserError("base sequence index must be >= 1");
  switch (family_) {
    case Family::EmptySet:
      return Structure(sig_, n);
    case Family::UnaryRare: {
      std::vector<std::vector<Tuple>> facts(unary_symbols_);
      for (int j = 0; j < unary_symbols_; ++j)
        for (int i = 0; i < unary_max_; ++i) {
          Element e = j * unary_max_ + i;
          if (e < n) facts[j].push_back({e});
        }
      return Structure(sig_, n, std::move(facts));
    }
    case Family::Path: {
      std::vector<Tuple> edges;
      edges.reserve(n);
      for (int i = 0; i < n; ++i) edges.push_back({i, i + 1});
      return Structure(sig_, n + 1, {std::move(edges)});
    }
    case Family::Grid: {
      const int side = n + 1;
      int total = 1;
      for (int d = 0; d < grid_dim_; ++d) {
        if (total > 2'000'000 / side)
          throw BudgetError("grid of side " + std::to_string(side) + " and dimension " +
                            std::to_string(grid_dim_) + " exceeds the generation budget");
        total *= side;
      }
      std::vector<Tuple> edges;
      std::vector<int> coord(grid_dim_, 0);
      for (int id = 0; id < total; ++id) {
        int stride = 1;
        for (int d = grid_dim_ - 1; d >= 0; --d) {
          if (coord[d] + 1 < side) {
            int nb = id + stride;
            edges.push_back({id, nb});
            edges.push_back({nb, id});
          }
          stride *= side;
        }
        for (int d = grid_dim_ - 1; d >= 0; --d) {
          if (++coord[d] < side) break;
          coord[d] = 0;
        }
      }
      return Structure(sig_, total, {std::move(edges)});
    }
    case Family::BoundedTree:
      return generate_tree(n);
  }
  throw InternalError("unknown base sequence family");
}

// Rejection sampling of a Galton-Watson tree conditioned on n vertices:
// grow by the offspring distribution, accept when the total progeny is
// exactly n. Seeded per n so probes can run concurrently.
Structure BaseSequence::generate_tree(int n) const {
  std::uint64_t stream = hash_combine(seed_, static_cast<std::uint64_t>(n));
  for (std::uint64_t attempt = 0; attempt < retry_cap_; ++attempt) {
    std::uint64_t h = hash_combine(stream, attempt);
    std::vector<Tuple> edges;
    int produced = 1;  // the root
    std::deque<int> frontier{0};
    bool reject = false;
    while (!frontier.empty()) {
      int v = frontier.front();
      frontier.pop_front();
      h = mix64(h + static_cast<std::uint64_t>(v) + 1);
      double u = unit_uniform(h);
      int children = tree_delta_;
      double acc = 0;
      for (int c = 0; c <= tree_delta_; ++c) {
        acc += tree_weights_[c];
        if (u < acc) {
          children = c;
          break;
        }
      }
      if (produced + children > n) {
        reject = true;
        break;
      }
      for (int c = 0; c < children; ++c) {
        int child = produced++;
        edges.push_back({v, child});
        frontier.push_back(child);
      }
    }
    if (!reject && produced == n) return Structure(sig_, n, {std::move(edges)});
  }
  throw UserError("tree sampling failed to hit " + std::to_string(n) +
                  " vertices within the retry cap of " + std::to_string(retry_cap_));
}

int BaseSequence::grid_corner_distance(int n, Element a) const {
  if (family_ != Family::Grid) throw InternalError("not a grid family");
  const int side = n + 1;
  int best = 0;
  Element rest = a;
  for (int d = 0; d < grid_dim_; ++d) {
    int c = rest % side;
    rest /= side;
    best += std::min(c, side - 1 - c);
  }
  return best;
}

BaseSequence BaseSequence::from_descriptor(const std::string& text) {
  auto colon = text.find(':');
  std::string family = text.substr(0, colon);
  std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);

  std::vector<std::pair<std::string, std::string>> kv;
  if (!args.empty())
    for (const auto& part : split(args, ',')) {
      auto eq = part.find('=');
      if (eq == std::string::npos)
        throw UserError("malformed descriptor argument '" + part + "'");
      kv.emplace_back(part.substr(0, eq), part.substr(eq + 1));
    }
  auto get = [&](const std::string& key, const std::string& fallback) {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    if (fallback.empty())
      throw UserError("descriptor '" + text + "' is missing " + key + "=");
    return fallback;
  };

  if (family == "set") return empty_set();
  if (family == "path") return path();
  if (family == "grid") return grid(std::stoi(get("d", "2")));
  if (family == "unary")
    return unary_rare(std::stoi(get("s", "1")), std::stoi(get("m", "1")));
  if (family == "tree") {
    int delta = std::stoi(get("delta", ""));
    std::uint64_t seed = std::stoull(get("seed", "0"));
    std::vector<double> weights;
    std::string wtext = get("weights", "");
    for (const auto& w : split(wtext, '/')) weights.push_back(std::stod(w));
    return bounded_tree(delta, std::move(weights), seed);
  }
  throw UserError("unknown base sequence family '" + family + "'");
}

std::string BaseSequence::descriptor() const {
  switch (family_) {
    case Family::EmptySet:
      return "set";
    case Family::Path:
      return "path";
    case Family::Grid:
      return "grid:d=" + std::to_string(grid_dim_);
    case Family::UnaryRare:
      return "unary:s=" + std::to_string(unary_symbols_) +
             ",m=" + std::to_string(unary_max_);
    case Family::BoundedTree: {
      std::string w;
      for (size_t i = 0; i < tree_weights_.size(); ++i)
        w += (i ? "/" : "") + format_double(tree_weights_[i]);
      return "tree:delta=" + std::to_string(tree_delta_) +
             ",seed=" + std::to_string(seed_) + ",weights=" + w;
    }
  }
  return "?";
}

}  // namespace plastar
