#include <cctype>
#include <charconv>
#include <set>

#include "plastar/formula.hpp"

namespace plastar {

namespace {

struct Token {
  enum Kind { Ident, Number, LParen, RParen, LBrack, RBrack, Comma, Colon, Dot,
              Equals, Leq, End } kind;
  std::string text;
  size_t pos;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) { advance(); }

  const Token& peek() const { return current_; }
  Token take() {
    Token t = current_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg, size_t pos) const {
    throw UserError("syntax error at offset " + std::to_string(pos) + ": " + msg);
  }

 private:
  void advance() {
    while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
    current_.pos = i_;
    if (i_ >= text_.size()) {
      current_ = {Token::End, "", i_};
      return;
    }
    char c = text_[i_];
    auto single = [&](Token::Kind k) {
      current_ = {k, std::string(1, c), i_};
      ++i_;
    };
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = i_;
      while (i_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[i_])) || text_[i_] == '.'))
        ++i_;
      current_ = {Token::Number, text_.substr(start, i_ - start), start};
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = i_;
      while (i_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[i_])) || text_[i_] == '_'))
        ++i_;
      current_ = {Token::Ident, text_.substr(start, i_ - start), start};
      return;
    }
    switch (c) {
      case '(': single(Token::LParen); return;
      case ')': single(Token::RParen); return;
      case '[': single(Token::LBrack); return;
      case ']': single(Token::RBrack); return;
      case ',': single(Token::Comma); return;
      case ':': single(Token::Colon); return;
      case '.': single(Token::Dot); return;
      case '=': single(Token::Equals); return;
      case '<':
        if (i_ + 1 < text_.size() && text_[i_ + 1] == '=') {
          current_ = {Token::Leq, "<=", i_};
          i_ += 2;
          return;
        }
        fail("unexpected '<'", i_);
      default:
        fail(std::string("unexpected character '") + c + "'", i_);
    }
  }

  const std::string& text_;
  size_t i_ = 0;
  Token current_{Token::End, "", 0};
};

class Parser {
 public:
  Parser(const std::string& text, const Signature& sig,
         const ConnectiveRegistry& conns, const AggregationRegistry& aggs)
      : lex_(text), sig_(sig), conns_(conns), aggs_(aggs) {}

  FormulaPtr run() {
    FormulaPtr f = formula();
    if (lex_.peek().kind != Token::End)
      lex_.fail("trailing input after formula", lex_.peek().pos);
    return f;
  }

 private:
  Token expect(Token::Kind k, const std::string& what) {
    if (lex_.peek().kind != k) lex_.fail("expected " + what, lex_.peek().pos);
    return lex_.take();
  }

  std::string variable() {
    Token t = expect(Token::Ident, "a variable name");
    return t.text;
  }

  double number(const Token& t) {
    double v = 0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
      lex_.fail("malformed numeric literal '" + t.text + "'", t.pos);
    if (v < 0.0 || v > 1.0)
      lex_.fail("constant outside [0,1]: " + t.text, t.pos);
    return v;
  }

  void bind(const std::vector<std::string>& vars, size_t pos) {
    for (const auto& v : vars) {
      if (scope_.count(v))
        lex_.fail("variable '" + v + "' is already in scope", pos);
      scope_.insert(v);
    }
  }
  void unbind(const std::vector<std::string>& vars) {
    for (const auto& v : vars) scope_.erase(v);
  }

  FormulaPtr quantifier(bool existential, size_t pos) {
    std::vector<std::string> vars;
    vars.push_back(variable());
    while (lex_.peek().kind == Token::Ident) vars.push_back(lex_.take().text);
    expect(Token::Dot, "'.' after quantified variables");
    bind(vars, pos);
    FormulaPtr body = formula();
    unbind(vars);
    auto agg = aggs_.lookup(existential ? "max" : "min");
    if (!agg) lex_.fail("max/min aggregation missing from registry", pos);
    return Formula::aggregation(agg, {body}, vars, {Formula::top()});
  }

  FormulaPtr formula() {
    const Token t = lex_.peek();
    switch (t.kind) {
      case Token::Number:
        lex_.take();
        return Formula::constant(number(t));
      case Token::Ident:
        break;
      default:
        lex_.fail("expected a formula", t.pos);
    }
    lex_.take();
    const std::string& name = t.text;
    if (name == "top") return Formula::top();
    if (name == "bot") return Formula::bottom();
    if (name == "exists") return quantifier(true, t.pos);
    if (name == "forall") return quantifier(false, t.pos);
    if (name == "dist") {
      expect(Token::LParen, "'(' after dist");
      std::string x = variable();
      expect(Token::Comma, "',' in dist atom");
      std::string y = variable();
      expect(Token::RParen, "')' in dist atom");
      expect(Token::Leq, "'<=' after dist(...)");
      Token bound = expect(Token::Number, "a radius");
      int radius = 0;
      auto res = std::from_chars(bound.text.data(),
                                 bound.text.data() + bound.text.size(), radius);
      if (res.ec != std::errc() || res.ptr != bound.text.data() + bound.text.size())
        lex_.fail("malformed radius '" + bound.text + "'", bound.pos);
      return Formula::dist_leq(x, y, radius);
    }
    if (name == "ctype") {
      expect(Token::Colon, "':' after ctype");
      Token hex = expect(Token::Ident, "a certificate hex string");
      CertPtr cert;
      try {
        cert = certificate_from_hex(hex.text);
      } catch (const UserError& e) {
        lex_.fail(e.what(), hex.pos);
      }
      auto vars = argument_vars();
      return Formula::type_atom(cert, vars);
    }

    switch (lex_.peek().kind) {
      case Token::Equals: {
        lex_.take();
        std::string y = variable();
        return Formula::eq(name, y);
      }
      case Token::LParen: {
        if (auto idx = sig_.index_of(name)) {
          auto vars = argument_vars();
          if (static_cast<int>(vars.size()) != sig_.symbol(*idx).arity)
            lex_.fail("relation '" + name + "' has arity " +
                          std::to_string(sig_.symbol(*idx).arity) + ", got " +
                          std::to_string(vars.size()),
                      t.pos);
          return Formula::atom(name, vars);
        }
        if (conns_.known(name)) {
          lex_.take();  // '('
          std::vector<FormulaPtr> subs;
          subs.push_back(formula());
          while (lex_.peek().kind == Token::Comma) {
            lex_.take();
            subs.push_back(formula());
          }
          expect(Token::RParen, "')' closing connective arguments");
          auto conn = conns_.lookup(name, static_cast<int>(subs.size()));
          if (!conn)
            lex_.fail("connective '" + name + "' does not take " +
                          std::to_string(subs.size()) + " arguments",
                      t.pos);
          return Formula::connective(conn, std::move(subs));
        }
        lex_.fail("unknown symbol '" + name + "'", t.pos);
      }
      case Token::LBrack: {
        auto agg = aggs_.lookup(name);
        if (!agg) lex_.fail("unknown aggregation function '" + name + "'", t.pos);
        lex_.take();  // '['
        std::vector<FormulaPtr> values, conds;
        std::vector<std::string> vars;
        // The grammar places value formulas before the variable block, so
        // rebinding violations surface at node construction instead of here.
        values.push_back(formula());
        while (lex_.peek().kind == Token::Comma) {
          lex_.take();
          values.push_back(formula());
        }
        expect(Token::Colon, "':' before bound variables");
        vars.push_back(variable());
        while (lex_.peek().kind == Token::Ident) vars.push_back(lex_.take().text);
        expect(Token::Colon, "':' before conditioning formulas");
        conds.push_back(formula());
        while (lex_.peek().kind == Token::Comma) {
          lex_.take();
          conds.push_back(formula());
        }
        expect(Token::RBrack, "']' closing aggregation");
        if (static_cast<int>(values.size()) != agg->arity ||
            values.size() != conds.size())
          lex_.fail("aggregation '" + name + "' takes " + std::to_string(agg->arity) +
                        " value and conditioning formulas",
                    t.pos);
        return Formula::aggregation(agg, std::move(values), std::move(vars),
                                    std::move(conds));
      }
      default:
        lex_.fail("expected '=', '(' or '[' after identifier '" + name + "'",
                  lex_.peek().pos);
    }
  }

  std::vector<std::string> argument_vars() {
    expect(Token::LParen, "'('");
    std::vector<std::string> vars;
    vars.push_back(variable());
    while (lex_.peek().kind == Token::Comma) {
      lex_.take();
      vars.push_back(variable());
    }
    expect(Token::RParen, "')'");
    return vars;
  }

  Lexer lex_;
  const Signature& sig_;
  const ConnectiveRegistry& conns_;
  const AggregationRegistry& aggs_;
  std::set<std::string> scope_;
};

FormulaPtr rename_free(const FormulaPtr& f, const std::string& from,
                       const std::string& to) {
  auto ren = [&](const std::string& v) { return v == from ? to : v; };
  switch (f->kind()) {
    case NodeKind::Const:
      return f;
    case NodeKind::Eq:
      return Formula::eq(ren(f->symbol()), ren(f->second_var()));
    case NodeKind::DistLeq:
      return Formula::dist_leq(ren(f->symbol()), ren(f->second_var()), f->dist_bound());
    case NodeKind::Atom: {
      std::vector<std::string> vars;
      for (const auto& v : f->vars()) vars.push_back(ren(v));
      return Formula::atom(f->symbol(), std::move(vars));
    }
    case NodeKind::TypeAtom: {
      std::vector<std::string> vars;
      for (const auto& v : f->vars()) vars.push_back(ren(v));
      return Formula::type_atom(f->type(), std::move(vars));
    }
    case NodeKind::Connective: {
      std::vector<FormulaPtr> subs;
      for (const auto& s : f->subs()) subs.push_back(rename_free(s, from, to));
      return Formula::connective(f->conn(), std::move(subs));
    }
    case NodeKind::Aggregation: {
      for (const auto& b : f->bound_vars())
        if (b == from) return f;  // shadowed, nothing free below
      std::vector<FormulaPtr> values, conds;
      for (const auto& v : f->values()) values.push_back(rename_free(v, from, to));
      for (const auto& c : f->conditions()) conds.push_back(rename_free(c, from, to));
      return Formula::aggregation(f->agg(), std::move(values), f->bound_vars(),
                                  std::move(conds));
    }
  }
  throw InternalError("unhandled node kind in rename");
}

}  // namespace

FormulaPtr parse_formula(const std::string& text, const Signature& sig,
                         const ConnectiveRegistry& conns,
                         const AggregationRegistry& aggs) {
  return Parser(text, sig, conns, aggs).run();
}

FormulaPtr pagerank_formula(int k, const std::string& edge_symbol) {
  if (k < 0) throw UserError("pagerank stage must be >= 0");
  const auto& aggs = AggregationRegistry::builtins();
  const auto& conns = ConnectiveRegistry::builtins();
  auto invlen = aggs.lookup("invlen");
  auto tsum = aggs.lookup("tsum");
  auto prod = conns.lookup("prod", 2);
  auto land = conns.lookup("and", 2);

  // PR_0(x) = invlen[x = x : y0 : top]
  FormulaPtr pr = Formula::aggregation(invlen, {Formula::eq("x", "x")}, {"y0"},
                                       {Formula::top()});
  for (int stage = 1; stage <= k; ++stage) {
    std::string y = "y" + std::to_string(stage);
    std::string z = "z" + std::to_string(stage);
    // |OUT_y|^-1 = invlen[y = y : z : E(y, z)]
    FormulaPtr out_inv = Formula::aggregation(
        invlen, {Formula::eq(y, y)}, {z}, {Formula::atom(edge_symbol, {y, z})});
    FormulaPtr prev = rename_free(pr, "x", y);
    FormulaPtr value = Formula::connective(
        land, {Formula::eq("x", "x"),
               Formula::connective(prod, {prev, out_inv})});
    pr = Formula::aggregation(tsum, {value}, {y},
                              {Formula::atom(edge_symbol, {y, "x"})});
  }
  return pr;
}

FormulaPtr pagerank_formula(int k, const std::string& edge_symbol,
                            const std::vector<CertPtr>& chi_types) {
  if (chi_types.empty())
    throw UserError(
        "closure-restricted pagerank needs conditioning types from a base "
        "sequence context");
  for (const auto& t : chi_types)
    if (t->anchor_arity != 2)
      throw UserError("pagerank conditioning types must have anchor arity 2");
  const auto& aggs = AggregationRegistry::builtins();
  const auto& conns = ConnectiveRegistry::builtins();
  auto invlen = aggs.lookup("invlen");
  auto tsum = aggs.lookup("tsum");
  auto prod = conns.lookup("prod", 2);
  auto land = conns.lookup("and", 2);
  const int t_count = static_cast<int>(chi_types.size());
  auto avg = conns.lookup("avg", t_count);

  auto averaged = [&](std::vector<FormulaPtr> branches) {
    if (branches.size() == 1) return branches[0];
    return Formula::connective(avg, std::move(branches));
  };

  // phi_0 = avg_i invlen[x = x : y0 : chi_i(x, y0)]
  std::vector<FormulaPtr> base;
  for (const auto& chi : chi_types)
    base.push_back(Formula::aggregation(
        invlen, {Formula::eq("x", "x")}, {"y0"},
        {Formula::type_atom(chi, {"x", "y0"})}));
  FormulaPtr pr = averaged(std::move(base));

  for (int stage = 1; stage <= k; ++stage) {
    std::string y = "y" + std::to_string(stage);
    std::string z = "z" + std::to_string(stage);
    std::vector<FormulaPtr> psi_branches;
    for (const auto& chi : chi_types)
      psi_branches.push_back(Formula::aggregation(
          invlen, {Formula::eq(y, y)}, {z},
          {Formula::connective(land, {Formula::type_atom(chi, {y, z}),
                                      Formula::atom(edge_symbol, {y, z})})}));
    FormulaPtr psi = averaged(std::move(psi_branches));
    FormulaPtr prev = rename_free(pr, "x", y);
    FormulaPtr value = Formula::connective(
        land,
        {Formula::eq("x", "x"), Formula::connective(prod, {prev, psi})});
    std::vector<FormulaPtr> branches;
    for (const auto& chi : chi_types)
      branches.push_back(Formula::aggregation(
          tsum, {value}, {y},
          {Formula::connective(land, {Formula::type_atom(chi, {y, "x"}),
                                      Formula::atom(edge_symbol, {y, "x"})})}));
    pr = averaged(std::move(branches));
  }
  return pr;
}

}  // namespace plastar
