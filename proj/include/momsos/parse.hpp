#pragma once

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "momsos/error.hpp"
#include "momsos/gmp.hpp"
#include "momsos/poly.hpp"
#include "momsos/semialg.hpp"

namespace momsos {

// GMP text format, one problem per file ('#' starts a comment):
//
//   set K on x1 { x1*(1-x1) >= 0; }           # optional named set
//   measure mu on K                           # or: measure mu on x1 { ... }
//   maximize -1*(x1 - x1^2) over mu          # or: maximize <p, mu> + 2*<q, nu>
//   subject to <1, mu> == 1
//              <x1, mu> <= 0.5               # further rows, ';' optional
//   mass mu <= 1
//
// Rows are  sum of [c [*]] <p, measure>  (== | <= | >=)  number.

/// Syntax or model error with a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t col, const std::string& what,
             std::vector<std::string> expected = {})
      : Error(format(line, col, what, expected)),
        line_(line),
        col_(col),
        expected_(std::move(expected)) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return col_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  static std::string format(std::size_t line, std::size_t col, const std::string& what,
                            const std::vector<std::string>& expected) {
    std::string s = std::to_string(line) + ":" + std::to_string(col) + ": " + what;
    if (!expected.empty()) {
      s += " (expected ";
      for (std::size_t i = 0; i < expected.size(); ++i) {
        s += (i ? (i + 1 == expected.size() ? " or " : ", ") : "") + expected[i];
      }
      s += ")";
    }
    return s;
  }

  std::size_t line_;
  std::size_t col_;
  std::vector<std::string> expected_;
};

namespace detail {

enum class Tok { ident, number, symbol, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  std::size_t line = 1;
  std::size_t col = 1;
};

inline std::vector<Token> tokenize(const std::string& src) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    const unsigned char ch = static_cast<unsigned char>(src[i]);
    if (std::isspace(ch)) {
      advance(1);
      continue;
    }
    if (ch == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    std::size_t j = i;
    if (std::isalpha(ch) || ch == '_') {
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) {
        ++j;
      }
      t.kind = Tok::ident;
    } else if (std::isdigit(ch) || (ch == '.' && i + 1 < src.size() &&
                                    std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      while (j < src.size() &&
             (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) {
        ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          j = k;
          while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        }
      }
      t.kind = Tok::number;
    } else {
      static const char* two[] = {">=", "<=", "=="};
      t.kind = Tok::symbol;
      j = i + 1;
      for (const char* s : two) {
        if (src.compare(i, 2, s) == 0) j = i + 2;
      }
      const std::string sym = src.substr(i, j - i);
      static const std::string singles = "{}()<>,;+-*^:=";
      if (sym.size() == 1 && singles.find(sym[0]) == std::string::npos) {
        throw ParseError(line, col, "unexpected character '" + sym + "'");
      }
    }
    t.text = src.substr(i, j - i);
    advance(j - i);
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

/// Polynomial over named variables, bound to a measure once it is known.
struct NamedPoly {
  using Key = std::map<std::string, int>;
  std::map<Key, double> terms;
  std::map<std::string, std::pair<std::size_t, std::size_t>> first_use;  // line, col

  static NamedPoly constant(double c) {
    NamedPoly p;
    if (c != 0.0) p.terms[{}] = c;
    return p;
  }

  NamedPoly operator+(const NamedPoly& q) const {
    NamedPoly r = *this;
    for (const auto& [k, c] : q.terms) {
      r.terms[k] += c;
      if (r.terms[k] == 0.0) r.terms.erase(k);
    }
    r.first_use.insert(q.first_use.begin(), q.first_use.end());
    return r;
  }

  NamedPoly scaled(double s) const {
    NamedPoly r;
    r.first_use = first_use;
    if (s == 0.0) return r;
    for (const auto& [k, c] : terms) r.terms[k] = c * s;
    return r;
  }

  NamedPoly operator*(const NamedPoly& q) const {
    NamedPoly r;
    for (const auto& [ka, ca] : terms) {
      for (const auto& [kb, cb] : q.terms) {
        Key k = ka;
        for (const auto& [v, e] : kb) k[v] += e;
        r.terms[k] += ca * cb;
        if (r.terms[k] == 0.0) r.terms.erase(k);
      }
    }
    r.first_use = first_use;
    r.first_use.insert(q.first_use.begin(), q.first_use.end());
    return r;
  }

  int degree() const {
    int d = 0;
    for (const auto& [k, c] : terms) {
      int s = 0;
      for (const auto& [v, e] : k) s += e;
      d = std::max(d, s);
    }
    return d;
  }

  Polynomial bind(const std::vector<std::string>& vars, const std::string& measure) const {
    for (const auto& [v, pos] : first_use) {
      if (std::find(vars.begin(), vars.end(), v) == vars.end()) {
        throw ParseError(pos.first, pos.second,
                         "'" + v + "' is not a variable of '" + measure + "'");
      }
    }
    Polynomial p(vars.size());
    for (const auto& [k, c] : terms) {
      std::vector<int> e(vars.size(), 0);
      for (const auto& [v, x] : k) {
        e[static_cast<std::size_t>(std::find(vars.begin(), vars.end(), v) - vars.begin())] = x;
      }
      p = p + Polynomial::monomial(Monomial(std::move(e)), c);
    }
    return p;
  }
};

class GmpParser {
 public:
  explicit GmpParser(const std::string& text) : toks_(tokenize(text)) {}

  GmpProblem parse() {
    while (!at_end()) {
      if (is_word("measure")) {
        parse_measure();
      } else if (is_word("set")) {
        parse_set();
      } else if (is_word("maximize") || is_word("minimize")) {
        parse_objective();
      } else if (is_word("subject")) {
        parse_constraints();
      } else if (is_word("mass")) {
        parse_mass();
      } else {
        fail("unexpected '" + peek().text + "'",
             {"'measure'", "'set'", "'maximize'", "'minimize'", "'subject to'", "'mass'"});
      }
    }
    if (measures_.empty()) fail("no measure declared", {"'measure'"});

    PolyTuple objective;
    for (std::size_t i = 0; i < measures_.size(); ++i) {
      objective.emplace_back(measures_[i].set.nvars());
    }
    std::vector<EqualityConstraint> eqs;
    std::vector<InequalityConstraint> ineqs;
    if (objective_) {
      for (const auto& [i, p] : objective_->terms) objective[i] = objective[i] + bind(i, p);
      if (sense_ == Sense::minimize) {
        for (auto& c : objective) c = c.scaled(-1.0);
      }
    }
    for (const auto& row : rows_) {
      PolyTuple t;
      for (const auto& m : measures_) t.emplace_back(m.set.nvars());
      for (const auto& [i, p] : row.expr.terms) t[i] = t[i] + bind(i, p);
      if (row.op == "==") {
        eqs.push_back({std::move(t), row.rhs});
      } else if (row.op == "<=") {
        ineqs.push_back({std::move(t), row.rhs});
      } else {
        for (auto& p : t) p = p.scaled(-1.0);
        ineqs.push_back({std::move(t), -row.rhs});
      }
    }
    std::vector<std::optional<double>> mass(measures_.size());
    for (const auto& [i, v] : mass_) mass[i] = v;
    return GmpProblem(measures_, std::move(objective), std::move(eqs), std::move(ineqs),
                      std::move(mass), sense_);
  }

  /// Parses a lone polynomial in the variables of `vars`.
  Polynomial parse_polynomial(const std::vector<std::string>& vars, const std::string& measure) {
    const NamedPoly p = parse_expr();
    if (!at_end()) fail("unexpected '" + peek().text + "'", {"end of input"});
    return p.bind(vars, measure);
  }

 private:
  // sum_i <p_i, mu_i>, keyed by measure index.
  struct LinExpr {
    std::vector<std::pair<std::size_t, NamedPoly>> terms;
  };
  struct Row {
    LinExpr expr;
    std::string op;
    double rhs = 0.0;
  };

  const Token& peek(std::size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  bool at_end() const { return peek().kind == Tok::end; }
  bool is_word(const char* w) const { return peek().kind == Tok::ident && peek().text == w; }
  bool is_sym(const char* s) const { return peek().kind == Tok::symbol && peek().text == s; }

  [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected = {}) const {
    const Token& t = peek();
    throw ParseError(t.line, t.col, at_end() && what.rfind("unexpected", 0) == 0
                                        ? "unexpected end of input"
                                        : what,
                     std::move(expected));
  }

  const Token& take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  void expect_sym(const char* s) {
    if (!is_sym(s)) fail("unexpected '" + peek().text + "'", {std::string("'") + s + "'"});
    take();
  }
  void expect_word(const char* w) {
    if (!is_word(w)) fail("unexpected '" + peek().text + "'", {std::string("'") + w + "'"});
    take();
  }
  std::string expect_ident(const char* what) {
    if (peek().kind != Tok::ident) fail("unexpected '" + peek().text + "'", {what});
    return take().text;
  }
  double expect_number() {
    bool neg = false;
    if (is_sym("-") || is_sym("+")) neg = take().text == "-";
    if (peek().kind != Tok::number) fail("unexpected '" + peek().text + "'", {"number"});
    const double v = number_value(take());
    return neg ? -v : v;
  }

  static double number_value(const Token& t) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.text.c_str(), &end);
    if (end != t.text.c_str() + t.text.size() || errno == ERANGE || !std::isfinite(v)) {
      throw ParseError(t.line, t.col, "malformed number '" + t.text + "'");
    }
    return v;
  }

  bool is_keyword() const {
    for (const char* w : {"measure", "set", "maximize", "minimize", "subject", "mass"}) {
      if (is_word(w)) return true;
    }
    return false;
  }

  std::size_t measure_at(const Token& t) const {
    for (std::size_t i = 0; i < measures_.size(); ++i) {
      if (measures_[i].name == t.text) return i;
    }
    throw ParseError(t.line, t.col, "unknown measure '" + t.text + "'");
  }

  Polynomial bind(std::size_t i, const NamedPoly& p) const {
    return p.bind(measures_[i].variables, measures_[i].name);
  }

  struct NamedSet {
    std::vector<std::string> vars;
    std::vector<Polynomial> g;
  };

  // v1, v2 { g >= 0; ... }
  NamedSet parse_set_body(const std::string& owner) {
    NamedSet out;
    for (;;) {
      const Token& vt = peek();
      std::string v = expect_ident("variable name");
      if (std::find(out.vars.begin(), out.vars.end(), v) != out.vars.end()) {
        throw ParseError(vt.line, vt.col, "duplicate variable '" + v + "'");
      }
      out.vars.push_back(std::move(v));
      if (!is_sym(",")) break;
      take();
    }
    expect_sym("{");
    while (!is_sym("}")) {
      if (at_end()) fail("unexpected end of input", {"'}'", "constraint"});
      const NamedPoly lhs = parse_expr();
      std::string op;
      if (is_sym(">=") || is_sym("<=")) {
        op = take().text;
      } else {
        fail("unexpected '" + peek().text + "'", {"'>='", "'<='"});
      }
      const NamedPoly rhs = parse_expr();
      const NamedPoly diff = op == ">=" ? lhs + rhs.scaled(-1.0) : rhs + lhs.scaled(-1.0);
      out.g.push_back(diff.bind(out.vars, owner));
      if (is_sym(";")) {
        take();
      } else if (!is_sym("}")) {
        fail("unexpected '" + peek().text + "'", {"';'", "'}'"});
      }
    }
    take();
    return out;
  }

  // set NAME on v1, v2 { ... }
  void parse_set() {
    take();
    const Token& nt = peek();
    const std::string name = expect_ident("set name");
    if (sets_.count(name)) throw ParseError(nt.line, nt.col, "duplicate set '" + name + "'");
    expect_word("on");
    sets_[name] = parse_set_body(name);
  }

  // measure NAME on v1, v2 { ... }   or   measure NAME on SET
  void parse_measure() {
    take();
    const Token& name_tok = peek();
    const std::string name = expect_ident("measure name");
    for (const auto& m : measures_) {
      if (m.name == name) throw ParseError(name_tok.line, name_tok.col, "duplicate measure '" + name + "'");
    }
    expect_word("on");
    NamedSet body;
    const auto it = peek().kind == Tok::ident ? sets_.find(peek().text) : sets_.end();
    if (it != sets_.end() && !(peek(1).kind == Tok::symbol &&
                               (peek(1).text == "," || peek(1).text == "{"))) {
      take();
      body = it->second;
    } else {
      body = parse_set_body(name);
    }
    const std::size_t n = body.vars.size();
    measures_.push_back({name, normalize(n, std::move(body.g)), std::move(body.vars)});
  }

  void parse_objective() {
    const Token kw = take();
    if (objective_) throw ParseError(kw.line, kw.col, "objective declared twice");
    sense_ = kw.text == "minimize" ? Sense::minimize : Sense::maximize;
    if (starts_linear_term()) {
      objective_ = parse_linexpr();
      return;
    }
    const NamedPoly p = parse_expr();
    expect_word("over");
    const Token& mt = peek();
    expect_ident("measure name");
    LinExpr e;
    e.terms.emplace_back(measure_at(mt), p);
    objective_ = std::move(e);
  }

  void parse_constraints() {
    take();
    expect_word("to");
    do {
      Row r;
      r.expr = parse_linexpr();
      if (is_sym("==") || is_sym("<=") || is_sym(">=")) {
        r.op = take().text;
      } else {
        fail("unexpected '" + peek().text + "'", {"'=='", "'<='", "'>='"});
      }
      r.rhs = expect_number();
      rows_.push_back(std::move(r));
      if (is_sym(";")) take();
    } while (!at_end() && !is_keyword());
  }

  void parse_mass() {
    take();
    const Token& mt = peek();
    expect_ident("measure name");
    const std::size_t i = measure_at(mt);
    expect_sym("<=");
    const Token& vt = peek();
    const double v = expect_number();
    if (!(v > 0)) throw ParseError(vt.line, vt.col, "mass bound must be positive");
    if (mass_.count(i)) throw ParseError(mt.line, mt.col, "mass bound declared twice");
    mass_[i] = v;
  }

  bool starts_linear_term() const {
    std::size_t k = 0;
    if (peek().kind == Tok::symbol && (peek().text == "-" || peek().text == "+")) ++k;
    if (peek(k).kind == Tok::symbol && peek(k).text == "<") return true;
    if (peek(k).kind != Tok::number) return false;
    if (peek(k + 1).kind == Tok::symbol && peek(k + 1).text == "*") ++k;
    return peek(k + 1).kind == Tok::symbol && peek(k + 1).text == "<";
  }

  // [+|-] [c [*]] <p, mu>  { (+|-) [c [*]] <p, mu> }
  LinExpr parse_linexpr() {
    LinExpr e;
    bool first = true;
    for (;;) {
      double sign = 1.0;
      if (is_sym("+") || is_sym("-")) {
        sign = take().text == "-" ? -1.0 : 1.0;
      } else if (!first) {
        break;
      }
      double c = 1.0;
      if (peek().kind == Tok::number) {
        c = number_value(take());
        if (is_sym("*")) take();
      }
      expect_sym("<");
      const NamedPoly p = parse_expr();
      expect_sym(",");
      const Token& mt = peek();
      expect_ident("measure name");
      const std::size_t i = measure_at(mt);
      expect_sym(">");
      e.terms.emplace_back(i, p.scaled(sign * c));
      first = false;
    }
    return e;
  }

  // expr := term {(+|-) term}
  NamedPoly parse_expr() {
    NamedPoly p = parse_term();
    while (is_sym("+") || is_sym("-")) {
      const bool minus = take().text == "-";
      const NamedPoly q = parse_term();
      p = p + (minus ? q.scaled(-1.0) : q);
    }
    return p;
  }

  // term := unary {[*] unary}; juxtaposition ("3x1^2", "2(x1 - 1)") multiplies
  NamedPoly parse_term() {
    NamedPoly p = parse_unary();
    for (;;) {
      if (is_sym("*")) {
        take();
      } else if (!(is_sym("(") || (peek().kind == Tok::ident && !is_keyword() &&
                                    peek().text != "over"))) {
        break;
      }
      p = p * parse_unary();
    }
    return p;
  }

  NamedPoly parse_unary() {
    if (is_sym("-")) {
      take();
      return parse_unary().scaled(-1.0);
    }
    if (is_sym("+")) {
      take();
      return parse_unary();
    }
    return parse_power();
  }

  // power := atom [^ integer]
  NamedPoly parse_power() {
    NamedPoly base = parse_atom();
    if (!is_sym("^")) return base;
    take();
    const Token& et = peek();
    if (et.kind != Tok::number || et.text.find_first_not_of("0123456789") != std::string::npos) {
      fail("unexpected '" + et.text + "'", {"nonnegative integer exponent"});
    }
    if (et.text.size() > 3 || std::stoi(et.text) > kMaxExponent) {
      throw ParseError(et.line, et.col, "exponent larger than " + std::to_string(kMaxExponent));
    }
    const int e = std::stoi(take().text);
    NamedPoly r = NamedPoly::constant(1.0);
    r.first_use = base.first_use;
    for (int k = 0; k < e; ++k) r = r * base;
    if (r.degree() > kMaxExponent) {
      throw ParseError(et.line, et.col, "degree larger than " + std::to_string(kMaxExponent));
    }
    return r;
  }

  NamedPoly parse_atom() {
    const Token& t = peek();
    if (t.kind == Tok::number) return NamedPoly::constant(number_value(take()));
    if (t.kind == Tok::ident && !is_keyword() && t.text != "over") {
      NamedPoly p;
      p.terms[{{t.text, 1}}] = 1.0;
      p.first_use[t.text] = {t.line, t.col};
      take();
      return p;
    }
    if (is_sym("(")) {
      take();
      NamedPoly p = parse_expr();
      expect_sym(")");
      return p;
    }
    fail("unexpected '" + t.text + "'", {"number", "variable", "'('"});
  }

  static constexpr int kMaxExponent = 64;

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<Measure> measures_;
  std::map<std::string, NamedSet> sets_;
  std::optional<LinExpr> objective_;
  Sense sense_ = Sense::maximize;
  std::vector<Row> rows_;
  std::map<std::size_t, double> mass_;
};

}  // namespace detail

/// Parses a GMP file's text. Every measure's set is put in ball normal form.
inline GmpProblem parse_gmp(const std::string& text) {
  return detail::GmpParser(text).parse();
}

inline GmpProblem parse_gmp_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return parse_gmp(s.str());
}

/// Parses "x1^2*x2" (or "1") as a monomial of measure `measure` of p.
inline Monomial parse_monomial(const GmpProblem& p, const std::string& measure,
                               const std::string& text) {
  const auto& m = p.measure(p.measure_index(measure));
  const Polynomial q = detail::GmpParser(text).parse_polynomial(m.variables, measure);
  if (q.terms().size() != 1 || q.terms().begin()->second != 1.0) {
    throw ParseError(1, 1, "'" + text + "' is not a monomial");
  }
  return q.terms().begin()->first;
}

}  // namespace momsos
