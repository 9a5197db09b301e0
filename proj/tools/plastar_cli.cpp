// plastar: batch experiments over PLA*-networks on bounded-degree base
// sequences. Subcommands: eval, types, classify, sample, exact, estimate,
// compile, check, distribution.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "plastar/elimination.hpp"

using namespace plastar;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string seq_desc = "path";
  int n = 10;
  std::string net_path;
  std::string formula_text;
  std::string formula_file;
  std::string at;
  std::vector<int> probes;
  int samples = 0;
  int worlds = 0;
  int max_anchors = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double eps = 0;
  double positivity_floor = 0;
  double stabilization_tol = 0;
  std::uint64_t enum_budget = 0;
  std::uint64_t tuple_budget = 0;
  std::uint64_t ct_cap = 0;
  int gamma_boost = 0;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--seq", o.seq_desc, "base sequence descriptor (path, set, grid:d=2, unary:s=2,m=3, tree:delta=...,seed=...,weights=...)");
  cmd->add_option("--n", o.n, "base structure index");
  cmd->add_option("--net", o.net_path, "network file");
  cmd->add_option("--formula", o.formula_text, "formula text");
  cmd->add_option("--formula-file", o.formula_file, "file with a formula");
  cmd->add_option("--at", o.at, "anchor assignment, e.g. x=3,y=5");
  cmd->add_option("--probes", o.probes, "probe schedule")->delimiter(',');
  cmd->add_option("--samples", o.samples, "sample count");
  cmd->add_option("--worlds", o.worlds, "worlds scanned per probe");
  cmd->add_option("--max-anchors", o.max_anchors, "anchors inspected per type");
  cmd->add_option("--seed", o.seed, "root seed (default: PLASTAR_SEED or 0)")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--eps", o.eps, "deviation bound for equivalence checks");
  cmd->add_option("--positivity-floor", o.positivity_floor,
                  "lower confidence floor for y-positivity");
  cmd->add_option("--stab-tol", o.stabilization_tol, "stabilization tolerance");
  cmd->add_option("--enum-budget", o.enum_budget, "exact enumeration budget");
  cmd->add_option("--tuple-budget", o.tuple_budget, "tuple scan budget");
  cmd->add_option("--ct-cap", o.ct_cap, "ct-sequence length cap");
  cmd->add_option("--gamma-boost", o.gamma_boost,
                  "widen the elimination conditioning radius");
  cmd->add_option("--jobs", o.jobs, "worker parallelism bound");
  cmd->add_option("--config", o.config_path,
                  "key=value config file (flags take precedence)");
}

// Config precedence: flags > config file > defaults. Keys are the long
// option names without the leading dashes.
void apply_config_file(CLI::App* cmd, CommonOpts& o) {
  if (o.config_path.empty()) return;
  std::ifstream in(o.config_path);
  if (!in) throw UserError("cannot open config file " + o.config_path);
  auto trim = [](std::string t) {
    auto issp = [](unsigned char c) { return std::isspace(c); };
    while (!t.empty() && issp(t.front())) t.erase(t.begin());
    while (!t.empty() && issp(t.back())) t.pop_back();
    return t;
  };
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UserError("config file: malformed line: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (cmd->count("--" + key) > 0) continue;  // flag given, keep it

    if (key == "seq") o.seq_desc = value;
    else if (key == "n") o.n = std::stoi(value);
    else if (key == "net") o.net_path = value;
    else if (key == "formula") o.formula_text = value;
    else if (key == "formula-file") o.formula_file = value;
    else if (key == "at") o.at = value;
    else if (key == "probes") {
      o.probes.clear();
      std::stringstream ss(value);
      std::string part;
      while (std::getline(ss, part, ',')) o.probes.push_back(std::stoi(part));
    }
    else if (key == "samples") o.samples = std::stoi(value);
    else if (key == "worlds") o.worlds = std::stoi(value);
    else if (key == "max-anchors") o.max_anchors = std::stoi(value);
    else if (key == "seed") { o.seed = std::stoull(value); o.seed_set = true; }
    else if (key == "eps") o.eps = std::stod(value);
    else if (key == "positivity-floor") o.positivity_floor = std::stod(value);
    else if (key == "stab-tol") o.stabilization_tol = std::stod(value);
    else if (key == "enum-budget") o.enum_budget = std::stoull(value);
    else if (key == "tuple-budget") o.tuple_budget = std::stoull(value);
    else if (key == "ct-cap") o.ct_cap = std::stoull(value);
    else if (key == "gamma-boost") o.gamma_boost = std::stoi(value);
    else if (key == "jobs") o.jobs = std::stoi(value);
    else throw UserError("config file: unknown key '" + key + "'");
  }
}

Config make_config(const CommonOpts& o) {
  Config cfg;
  if (!o.probes.empty()) cfg.probes = o.probes;
  if (o.samples > 0) cfg.samples = o.samples;
  if (o.worlds > 0) cfg.worlds_per_probe = o.worlds;
  if (o.max_anchors > 0) cfg.max_anchors = o.max_anchors;
  if (o.eps > 0) cfg.epsilon = o.eps;
  if (o.positivity_floor > 0) cfg.positivity_floor = o.positivity_floor;
  if (o.stabilization_tol > 0) cfg.stabilization_tol = o.stabilization_tol;
  if (o.enum_budget > 0) cfg.enumeration_budget = o.enum_budget;
  if (o.tuple_budget > 0) cfg.tuple_budget = o.tuple_budget;
  if (o.ct_cap > 0) cfg.ct_length_cap = o.ct_cap;
  cfg.gamma_boost = o.gamma_boost;
  cfg.jobs = o.jobs;
  if (o.seed_set) {
    cfg.seed = o.seed;
  } else if (const char* env = std::getenv("PLASTAR_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }
  return cfg;
}

PlaNetwork load_network(const CommonOpts& o, const BaseSequence& seq) {
  if (o.net_path.empty()) return PlaNetwork::trivial(seq.signature());
  std::ifstream in(o.net_path);
  if (!in) throw UserError("cannot open network file " + o.net_path);
  return parse_network(in);
}

std::string load_formula_text(const CommonOpts& o) {
  if (!o.formula_text.empty()) return o.formula_text;
  if (o.formula_file.empty()) throw UserError("missing --formula / --formula-file");
  std::ifstream in(o.formula_file);
  if (!in) throw UserError("cannot open formula file " + o.formula_file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Assignment parse_at(const std::string& at) {
  Assignment out;
  if (at.empty()) return out;
  std::stringstream ss(at);
  std::string part;
  while (std::getline(ss, part, ',')) {
    auto eq = part.find('=');
    if (eq == std::string::npos)
      throw UserError("malformed --at assignment '" + part + "'");
    out.emplace_back(part.substr(0, eq),
                     static_cast<Element>(std::stol(part.substr(eq + 1))));
  }
  return out;
}

int cmd_eval(const CommonOpts& o) {
  BaseSequence seq = BaseSequence::from_descriptor(o.seq_desc);
  PlaNetwork net = load_network(o, seq);
  Config cfg = make_config(o);
  TypeContext ctx(seq, cfg);
  FormulaPtr f = parse_formula(load_formula_text(o), net.sigma());

  std::shared_ptr<const Structure> s;
  if (net.num_random_symbols() > 0) {
    World w = sample_world(net, *ctx.base(o.n), cfg.seed, cfg.tuple_budget);
    s = std::make_shared<const Structure>(std::move(w.structure));
  } else {
    s = ctx.base(o.n);
  }
  EvalEnv env = ctx.env_for(*s, o.n);
  std::cout << format_double(evaluate(env, *f, parse_at(o.at))) << "\n";
  return 0;
}

int cmd_types(const CommonOpts& o, int lambda, int arity, bool sigma_scope,
              bool classify) {
  BaseSequence seq = BaseSequence::from_descriptor(o.seq_desc);
  PlaNetwork net = load_network(o, seq);
  Config cfg = make_config(o);
  TypeContext ctx(seq, cfg);
  int scope_len = sigma_scope ? net.sigma().size() : seq.signature().size();
  auto realized = ctx.enumerate_realized_types(
      cfg.probes, lambda, arity, scope_len,
      net.num_random_symbols() > 0 ? &net : nullptr);
  std::cout << "# type count seen_at";
  if (classify) std::cout << " verdict dim rare_flag cap";
  std::cout << " certificate\n";
  for (const auto& rt : realized) {
    std::cout << "type " << rt.count << " " << rt.probe_n;
    if (classify) {
      std::vector<int> ys;
      for (int i = 0; i < arity; ++i) ys.push_back(i);
      Classification cls = ctx.classify(*rt.cert, ys);
      const char* v = cls.verdict == Verdict::Bounded ? "Bounded"
                      : cls.verdict == Verdict::UniformlyUnbounded
                          ? "UniformlyUnbounded"
                          : "StronglyUnbounded";
      bool rare = false;
      for (const auto& c : cls.classes) rare |= c.near_rare;
      std::cout << " " << v;
      if (cls.verdict == Verdict::Bounded && cls.cap_known)
        std::cout << "(" << cls.cap << ")";
      std::cout << (cls.empirical ? "[empirical]" : "") << " " << cls.dimension
                << " " << (rare ? 1 : 0) << " "
                << (cls.cap_known ? std::to_string(cls.cap) : "-");
    }
    std::cout << " " << rt.cert->hex() << "\n";
  }
  return 0;
}

int cmd_sample(const CommonOpts& o) {
  BaseSequence seq = BaseSequence::from_descriptor(o.seq_desc);
  PlaNetwork net = load_network(o, seq);
  Config cfg = make_config(o);
  Structure base = seq.generate(o.n);
  World w = sample_world(net, base, cfg.seed, cfg.tuple_budget);
  std::cout << "# world seed=" << w.seed << " network=" << w.network_id << "\n";
  std::cout << serialize_structure(w.structure);
  return 0;
}

int cmd_exact(const CommonOpts& o, const std::string& event_text) {
  BaseSequence seq = BaseSequence::from_descriptor(o.seq_desc);
  PlaNetwork net = load_network(o, seq);
  Config cfg = make_config(o);
  Structure base = seq.generate(o.n);
  FormulaPtr event = parse_formula(event_text, net.sigma());
  double p = exact_probability(net, base, *event, parse_at(o.at),
                               cfg.enumeration_budget, cfg.tuple_budget);
  std::cout << format_double(p) << "\n";
  return 0;
}

int cmd_estimate(const CommonOpts& o, const std::string& event_text) {
  BaseSequence seq = BaseSequence::from_descriptor(o.seq_desc);
  PlaNetwork net = load_network(o, seq);
  Config cfg = make_config(o);
  Structure base = seq.generate(o.n);
  FormulaPtr event = parse_formula(event_text, net.sigma());
  ProbabilityEstimate est =
      estimate_probability(net, base, *event, parse_at(o.at), cfg.samples,
                           cfg.seed, cfg.confidence, cfg.jobs, cfg.tuple_budget);
  std::cout << "# estimate radius samples confidence\n";
  std::cout << format_double(est.estimate) << " " << format_double(est.radius)
            << " " << est.samples << " " << format_double(est.confidence) << "\n";
  return 0;
}

int cmd_compile(const CommonOpts& o, const std::string& out_path,
                const std::string& report_path) {
  BaseSequence seq = BaseSequence::from_descriptor(o.seq_desc);
  PlaNetwork net = load_network(o, seq);
  Config cfg = make_config(o);
  TypeContext ctx(seq, cfg);
  Compiler comp(ctx, net);
  FormulaPtr f = parse_formula(load_formula_text(o), net.sigma());
  auto [basic, report] = comp.compile(f);
  std::string text = basic.serialize();
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    out << text;
  }
  std::string rep = report.to_string();
  if (report_path.empty()) {
    std::cout << rep;
  } else {
    std::ofstream out(report_path);
    out << rep;
  }
  return 0;
}

int cmd_check(const CommonOpts& o, const std::string& basic_path) {
  BaseSequence seq = BaseSequence::from_descriptor(o.seq_desc);
  PlaNetwork net = load_network(o, seq);
  Config cfg = make_config(o);
  TypeContext ctx(seq, cfg);
  Compiler comp(ctx, net);
  FormulaPtr f = parse_formula(load_formula_text(o), net.sigma());
  std::ifstream in(basic_path);
  if (!in) throw UserError("cannot open basic formula file " + basic_path);
  BasicFormula basic = BasicFormula::parse(in);
  EquivalenceReport rep = comp.check_asymptotic_equivalence(
      f, basic, o.eps > 0 ? o.eps : cfg.epsilon);
  std::cout << "# probe deviation_fraction\n";
  for (size_t i = 0; i < rep.probe_sizes.size(); ++i)
    std::cout << rep.probe_sizes[i] << " "
              << format_double(rep.deviation_fraction[i]) << "\n";
  std::cout << (rep.pass ? "PASS" : "FAIL") << "\n";
  return 0;
}

int cmd_distribution(const CommonOpts& o, int anchor) {
  BaseSequence seq = BaseSequence::from_descriptor(o.seq_desc);
  PlaNetwork net = load_network(o, seq);
  Config cfg = make_config(o);
  TypeContext ctx(seq, cfg);
  Compiler comp(ctx, net);
  FormulaPtr f = parse_formula(load_formula_text(o), net.sigma());
  auto [basic, report] = comp.compile(f);

  int n = cfg.probes.back();
  auto b = ctx.base(n);
  if (anchor < 0) anchor = b->domain_size() / 2;
  Tuple at(static_cast<size_t>(basic.anchor_arity()), anchor);
  CertPtr p_tau = ctx.closure_type(*b, n, at, basic.level(), seq.signature().size());

  auto rows = comp.value_distribution(basic, *p_tau);
  std::cout << "# value beta stabilized\n";
  for (const auto& [value, est] : rows)
    std::cout << format_double(value) << " " << format_double(est.alpha) << " "
              << (est.stabilized ? 1 : 0) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probability-logic engine for PLA* over bounded-degree base sequences"};
  app.require_subcommand(1);

  CommonOpts o;
  int lambda = 0, arity = 1, anchor = -1;
  bool sigma_scope = false;
  std::string event_text, out_path, report_path, basic_path;

  auto* eval = app.add_subcommand("eval", "evaluate a formula");
  add_common(eval, o);

  auto* types = app.add_subcommand("types", "realized closure types");
  add_common(types, o);
  types->add_option("--lambda", lambda, "type radius");
  types->add_option("--arity", arity, "anchor arity");
  types->add_flag("--sigma", sigma_scope, "scan sampled worlds (sigma scope)");

  auto* classify = app.add_subcommand("classify", "realized types with verdicts");
  add_common(classify, o);
  classify->add_option("--lambda", lambda, "type radius");
  classify->add_option("--arity", arity, "anchor arity");
  classify->add_flag("--sigma", sigma_scope, "scan sampled worlds (sigma scope)");

  auto* sample = app.add_subcommand("sample", "sample a world");
  add_common(sample, o);

  auto* exact = app.add_subcommand("exact", "exact event probability");
  add_common(exact, o);
  exact->add_option("--event", event_text, "0/1-valued event formula")->required();

  auto* estimate = app.add_subcommand("estimate", "Monte Carlo event probability");
  add_common(estimate, o);
  estimate->add_option("--event", event_text, "0/1-valued event formula")->required();

  auto* compile = app.add_subcommand("compile", "compile to a basic formula");
  add_common(compile, o);
  compile->add_option("--out", out_path, "basic formula output file");
  compile->add_option("--report", report_path, "estimate report output file");

  auto* check = app.add_subcommand("check", "check asymptotic equivalence");
  add_common(check, o);
  check->add_option("--basic", basic_path, "compiled basic formula file")->required();

  auto* distribution = app.add_subcommand("distribution", "value distribution table");
  add_common(distribution, o);
  distribution->add_option("--anchor", anchor, "anchor element (default: middle)");

  CLI11_PARSE(app, argc, argv);

  try {
    for (CLI::App* sub : app.get_subcommands()) apply_config_file(sub, o);
    if (app.got_subcommand(eval)) return cmd_eval(o);
    if (app.got_subcommand(types)) return cmd_types(o, lambda, arity, sigma_scope, false);
    if (app.got_subcommand(classify)) return cmd_types(o, lambda, arity, sigma_scope, true);
    if (app.got_subcommand(sample)) return cmd_sample(o);
    if (app.got_subcommand(exact)) return cmd_exact(o, event_text);
    if (app.got_subcommand(estimate)) return cmd_estimate(o, event_text);
    if (app.got_subcommand(compile)) return cmd_compile(o, out_path, report_path);
    if (app.got_subcommand(check)) return cmd_check(o, basic_path);
    if (app.got_subcommand(distribution)) return cmd_distribution(o, anchor);
  } catch (const BudgetError& e) {
    std::cerr << "budget error: " << e.what() << "\n";
    return 3;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
