#include "isostc/expr.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <sstream>

namespace isostc {

struct Expr::Node {
  Kind kind = Kind::constant;
  double value = 0.0;
  std::string name;
  int exponent = 0;
  std::vector<Expr> args;
};

namespace {

std::shared_ptr<const Expr::Node> zero_node() {
  static const auto node = std::make_shared<const Expr::Node>();
  return node;
}

}  // namespace

Expr::Expr() : node_(zero_node()) {}
Expr::Expr(double value) : Expr(constant(value)) {}
Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::constant;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::variable;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr Expr::sum(std::vector<Expr> terms) {
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return terms.front();
  auto n = std::make_shared<Node>();
  n->kind = Kind::sum;
  n->args = std::move(terms);
  return Expr(std::move(n));
}

Expr Expr::product(std::vector<Expr> factors) {
  if (factors.empty()) return constant(1.0);
  if (factors.size() == 1) return factors.front();
  auto n = std::make_shared<Node>();
  n->kind = Kind::product;
  n->args = std::move(factors);
  return Expr(std::move(n));
}

Expr Expr::quotient(Expr num, Expr den) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::quotient;
  n->args = {std::move(num), std::move(den)};
  return Expr(std::move(n));
}

Expr Expr::negation(Expr arg) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::negation;
  n->args = {std::move(arg)};
  return Expr(std::move(n));
}

Expr Expr::power(Expr base, int exponent) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::power;
  n->exponent = exponent;
  n->args = {std::move(base)};
  return Expr(std::move(n));
}

Expr Expr::square_root(Expr arg) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::sqrt;
  n->args = {std::move(arg)};
  return Expr(std::move(n));
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
int Expr::exponent() const { return node_->exponent; }
const std::vector<Expr>& Expr::args() const { return node_->args; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Expr::Kind::constant:
      return a.value() == b.value();
    case Expr::Kind::variable:
      return a.name() == b.name();
    case Expr::Kind::power:
      if (a.exponent() != b.exponent()) return false;
      break;
    default:
      break;
  }
  return a.args() == b.args();
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::sum({a, Expr::negation(b)}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::quotient(a, b); }
Expr operator-(const Expr& a) { return Expr::negation(a); }

Alphabet Alphabet::state_and_error(int n, bool with_w) {
  std::set<std::string, std::less<>> names;
  for (int i = 1; i <= n; ++i) {
    names.insert("x" + std::to_string(i));
    names.insert("e" + std::to_string(i));
  }
  if (with_w) {
    names.insert("w");
    names.insert("ew");
  }
  return Alphabet(std::move(names));
}

// ---------------------------------------------------------------------------
// parsing

namespace {

class Parser {
 public:
  Parser(std::string_view text, const Alphabet& alphabet) : text_(text), alphabet_(alphabet) {}

  Expr run() {
    Expr e = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("syntax error: " + what, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Expr parse_sum() {
    std::vector<Expr> terms{parse_term()};
    for (;;) {
      if (accept('+')) {
        terms.push_back(parse_term());
      } else if (accept('-')) {
        terms.push_back(Expr::negation(parse_term()));
      } else {
        break;
      }
    }
    return Expr::sum(std::move(terms));
  }

  Expr parse_term() {
    std::vector<Expr> factors{parse_unary()};
    for (;;) {
      if (accept('*')) {
        factors.push_back(parse_unary());
      } else if (accept('/')) {
        Expr num = Expr::product(std::move(factors));
        factors = {Expr::quotient(std::move(num), parse_unary())};
      } else {
        break;
      }
    }
    return Expr::product(std::move(factors));
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::negation(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (!accept('^')) return base;
    bool negative = false;
    bool paren = accept('(');
    if (accept('-')) negative = true;
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("integer exponent expected");
    int n = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, n);
    if (ec != std::errc()) {
      pos_ = start;
      fail("exponent out of range");
    }
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      fail("exponent must be an integer");
    }
    if (paren && !accept(')')) fail("')' expected");
    return Expr::power(std::move(base), negative ? -n : n);
  }

  Expr parse_primary() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Expr inner = parse_sum();
      if (!accept(')')) fail("')' expected");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      std::string ident(text_.substr(start, pos_ - start));
      if (ident == "sqrt") {
        if (!accept('(')) fail("'(' expected after sqrt");
        Expr inner = parse_sum();
        if (!accept(')')) fail("')' expected");
        return Expr::square_root(std::move(inner));
      }
      if (!alphabet_.accepts(ident)) {
        throw ParseError("unknown identifier '" + ident + "'", start);
      }
      return Expr::variable(std::move(ident));
    }
    if (c == '\0') fail("unexpected end of input");
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      const std::size_t exp_start = pos_;
      digits();
      if (exp_start == pos_) pos_ = save;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return Expr::constant(v);
  }

  std::string_view text_;
  const Alphabet& alphabet_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, const Alphabet& alphabet) { return Parser(text, alphabet).run(); }

// ---------------------------------------------------------------------------
// printing

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Precedence levels: sum 1, product/quotient 2, negation 3, power 4, atom 5.
int precedence(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::constant:
      return e.value() < 0.0 || std::signbit(e.value()) ? 3 : 5;
    case Expr::Kind::variable:
    case Expr::Kind::sqrt:
      return 5;
    case Expr::Kind::power:
      return 4;
    case Expr::Kind::negation:
      return 3;
    case Expr::Kind::product:
    case Expr::Kind::quotient:
      return 2;
    case Expr::Kind::sum:
      return 1;
  }
  return 0;
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print(e, out);
  if (wrap) out += ')';
}

void print(const Expr& e, std::string& out) {
  const auto& args = e.args();
  switch (e.kind()) {
    case Expr::Kind::constant:
      if (std::signbit(e.value())) {
        out += "-";
        out += format_number(-e.value());
      } else {
        out += format_number(e.value());
      }
      return;
    case Expr::Kind::variable:
      out += e.name();
      return;
    case Expr::Kind::sum:
      for (std::size_t i = 0; i < args.size(); ++i) {
        const Expr& t = args[i];
        if (i > 0 && t.kind() == Expr::Kind::negation) {
          out += " - ";
          print_wrapped(t.args()[0], precedence(t.args()[0]) <= 1, out);
        } else {
          if (i > 0) out += " + ";
          // a leading negation is re-read as unary minus; wrap nested sums
          print_wrapped(t, precedence(t) <= 1 || (i > 0 && precedence(t) == 3), out);
        }
      }
      return;
    case Expr::Kind::product:
      for (std::size_t i = 0; i < args.size(); ++i) {
        const Expr& f = args[i];
        if (i > 0) out += '*';
        const bool wrap = f.kind() == Expr::Kind::sum || f.kind() == Expr::Kind::product ||
                          (f.kind() == Expr::Kind::quotient && i > 0) || precedence(f) == 3;
        print_wrapped(f, wrap, out);
      }
      return;
    case Expr::Kind::quotient: {
      const Expr& num = args[0];
      const Expr& den = args[1];
      print_wrapped(num, precedence(num) <= 1 || precedence(num) == 3, out);
      out += '/';
      print_wrapped(den, precedence(den) <= 3, out);
      return;
    }
    case Expr::Kind::negation:
      out += '-';
      print_wrapped(args[0], precedence(args[0]) <= 3, out);
      return;
    case Expr::Kind::power:
      print_wrapped(args[0], precedence(args[0]) <= 4, out);
      out += '^';
      out += std::to_string(e.exponent());
      return;
    case Expr::Kind::sqrt:
      out += "sqrt(";
      print(args[0], out);
      out += ')';
      return;
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

std::string to_string(const Interval& iv) {
  return "[" + format_number(iv.lo) + ", " + format_number(iv.hi) + "]";
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

double ipow(double x, int n) {
  if (n < 0) {
    if (x == 0.0) throw EvalError("division by zero in negative power");
    return 1.0 / ipow(x, -n);
  }
  double r = 1.0;
  while (n > 0) {
    if (n & 1) r *= x;
    x *= x;
    n >>= 1;
  }
  return r;
}

}  // namespace

double eval(const Expr& e, const Env& env) {
  const auto& args = e.args();
  switch (e.kind()) {
    case Expr::Kind::constant:
      return e.value();
    case Expr::Kind::variable: {
      auto it = env.find(e.name());
      if (it == env.end()) throw EvalError("unbound variable '" + e.name() + "'");
      return it->second;
    }
    case Expr::Kind::sum: {
      double s = 0.0;
      for (const auto& a : args) s += eval(a, env);
      return s;
    }
    case Expr::Kind::product: {
      double p = 1.0;
      for (const auto& a : args) p *= eval(a, env);
      return p;
    }
    case Expr::Kind::quotient: {
      const double den = eval(args[1], env);
      if (den == 0.0) throw EvalError("division by zero");
      return eval(args[0], env) / den;
    }
    case Expr::Kind::negation:
      return -eval(args[0], env);
    case Expr::Kind::power:
      return ipow(eval(args[0], env), e.exponent());
    case Expr::Kind::sqrt: {
      const double v = eval(args[0], env);
      if (v < 0.0) throw EvalError("square root of negative value");
      return std::sqrt(v);
    }
  }
  return 0.0;
}

Interval interval_eval(const Expr& e, const IntervalBox& box) {
  const auto& args = e.args();
  switch (e.kind()) {
    case Expr::Kind::constant:
      return Interval(e.value());
    case Expr::Kind::variable: {
      auto it = box.find(e.name());
      if (it == box.end()) throw EvalError("unbound variable '" + e.name() + "'");
      return it->second;
    }
    case Expr::Kind::sum: {
      Interval s(0.0);
      for (const auto& a : args) s = s + interval_eval(a, box);
      return s;
    }
    case Expr::Kind::product: {
      Interval p(1.0);
      for (const auto& a : args) p = p * interval_eval(a, box);
      return p;
    }
    case Expr::Kind::quotient:
      return interval_eval(args[0], box) / interval_eval(args[1], box);
    case Expr::Kind::negation:
      return -interval_eval(args[0], box);
    case Expr::Kind::power:
      return pow(interval_eval(args[0], box), e.exponent());
    case Expr::Kind::sqrt:
      return sqrt(interval_eval(args[0], box));
  }
  return {};
}

// ---------------------------------------------------------------------------
// simplification

namespace {

Expr simplify_once(const Expr& e);

Expr simplify_sum(const std::vector<Expr>& raw) {
  std::vector<Expr> terms;
  double c = 0.0;
  for (const auto& a : raw) {
    Expr s = simplify_once(a);
    if (s.kind() == Expr::Kind::sum) {
      for (const auto& t : s.args()) {
        if (t.is_constant()) {
          c += t.value();
        } else {
          terms.push_back(t);
        }
      }
    } else if (s.is_constant()) {
      c += s.value();
    } else {
      terms.push_back(s);
    }
  }
  if (c != 0.0) terms.push_back(Expr::constant(c));
  return Expr::sum(std::move(terms));
}

Expr simplify_product(const std::vector<Expr>& raw) {
  std::vector<Expr> factors;
  double c = 1.0;
  auto absorb = [&](const Expr& f, auto& self) -> void {
    if (f.is_constant()) {
      c *= f.value();
    } else if (f.kind() == Expr::Kind::negation) {
      c = -c;
      self(f.args()[0], self);
    } else if (f.kind() == Expr::Kind::product) {
      for (const auto& g : f.args()) self(g, self);
    } else {
      factors.push_back(f);
    }
  };
  for (const auto& a : raw) absorb(simplify_once(a), absorb);
  if (c == 0.0) return Expr::constant(0.0);
  if (factors.empty()) return Expr::constant(c);
  Expr body = Expr::product(factors);
  if (c == 1.0) return body;
  if (c == -1.0) return Expr::negation(body);
  factors.insert(factors.begin(), Expr::constant(c));
  return Expr::product(std::move(factors));
}

Expr simplify_once(const Expr& e) {
  const auto& args = e.args();
  switch (e.kind()) {
    case Expr::Kind::constant:
    case Expr::Kind::variable:
      return e;
    case Expr::Kind::sum:
      return simplify_sum(args);
    case Expr::Kind::product:
      return simplify_product(args);
    case Expr::Kind::quotient: {
      Expr num = simplify_once(args[0]);
      Expr den = simplify_once(args[1]);
      if (num.is_constant(0.0) && !den.is_constant(0.0)) return Expr::constant(0.0);
      if (den.is_constant(1.0)) return num;
      if (den.is_constant(-1.0)) return simplify_once(Expr::negation(num));
      if (num.is_constant() && den.is_constant() && den.value() != 0.0) {
        return Expr::constant(num.value() / den.value());
      }
      return Expr::quotient(std::move(num), std::move(den));
    }
    case Expr::Kind::negation: {
      Expr a = simplify_once(args[0]);
      if (a.is_constant()) return Expr::constant(-a.value());
      if (a.kind() == Expr::Kind::negation) return a.args()[0];
      if (a.kind() == Expr::Kind::product && a.args().front().is_constant()) {
        return simplify_product({Expr::constant(-1.0), a});
      }
      return Expr::negation(std::move(a));
    }
    case Expr::Kind::power: {
      Expr base = simplify_once(args[0]);
      const int n = e.exponent();
      if (n == 0) return Expr::constant(1.0);
      if (n == 1) return base;
      if (base.is_constant()) {
        if (base.value() == 0.0 && n < 0) return Expr::power(std::move(base), n);
        return Expr::constant(ipow(base.value(), n));
      }
      if (base.kind() == Expr::Kind::power) return simplify_once(Expr::power(base.args()[0], base.exponent() * n));
      if (base.kind() == Expr::Kind::negation) {
        Expr inner = Expr::power(base.args()[0], n);
        return n % 2 == 0 ? simplify_once(inner) : simplify_once(Expr::negation(inner));
      }
      return Expr::power(std::move(base), n);
    }
    case Expr::Kind::sqrt: {
      Expr a = simplify_once(args[0]);
      if (a.is_constant() && a.value() >= 0.0) return Expr::constant(std::sqrt(a.value()));
      return Expr::square_root(std::move(a));
    }
  }
  return e;
}

}  // namespace

Expr simplify(const Expr& e) {
  Expr cur = simplify_once(e);
  for (int i = 0; i < 16; ++i) {
    Expr next = simplify_once(cur);
    if (next == cur) return cur;
    cur = std::move(next);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// differentiation

namespace {

bool depends_on(const Expr& e, std::string_view var) {
  if (e.kind() == Expr::Kind::variable) return e.name() == var;
  for (const auto& a : e.args()) {
    if (depends_on(a, var)) return true;
  }
  return false;
}

Expr diff_raw(const Expr& e, std::string_view var) {
  if (!depends_on(e, var)) return Expr::constant(0.0);
  const auto& args = e.args();
  switch (e.kind()) {
    case Expr::Kind::constant:
      return Expr::constant(0.0);
    case Expr::Kind::variable:
      return Expr::constant(1.0);
    case Expr::Kind::sum: {
      std::vector<Expr> terms;
      for (const auto& a : args) {
        if (depends_on(a, var)) terms.push_back(diff_raw(a, var));
      }
      return Expr::sum(std::move(terms));
    }
    case Expr::Kind::product: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (!depends_on(args[i], var)) continue;
        std::vector<Expr> factors = args;
        factors[i] = diff_raw(args[i], var);
        terms.push_back(Expr::product(std::move(factors)));
      }
      return Expr::sum(std::move(terms));
    }
    case Expr::Kind::quotient: {
      const Expr& u = args[0];
      const Expr& v = args[1];
      Expr num = diff_raw(u, var) * v - u * diff_raw(v, var);
      return Expr::quotient(std::move(num), Expr::power(v, 2));
    }
    case Expr::Kind::negation:
      return Expr::negation(diff_raw(args[0], var));
    case Expr::Kind::power: {
      const int n = e.exponent();
      return Expr::product(
          {Expr::constant(static_cast<double>(n)), Expr::power(args[0], n - 1), diff_raw(args[0], var)});
    }
    case Expr::Kind::sqrt:
      return Expr::quotient(diff_raw(args[0], var), Expr::product({Expr::constant(2.0), e}));
  }
  return Expr::constant(0.0);
}

}  // namespace

Expr diff(const Expr& e, std::string_view var) { return simplify(diff_raw(e, var)); }

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& bindings) {
  if (e.kind() == Expr::Kind::variable) {
    auto it = bindings.find(e.name());
    return it == bindings.end() ? e : it->second;
  }
  if (e.kind() == Expr::Kind::constant) return e;
  std::vector<Expr> args;
  args.reserve(e.args().size());
  for (const auto& a : e.args()) args.push_back(substitute(a, bindings));
  switch (e.kind()) {
    case Expr::Kind::sum:
      return Expr::sum(std::move(args));
    case Expr::Kind::product:
      return Expr::product(std::move(args));
    case Expr::Kind::quotient:
      return Expr::quotient(args[0], args[1]);
    case Expr::Kind::negation:
      return Expr::negation(args[0]);
    case Expr::Kind::power:
      return Expr::power(args[0], e.exponent());
    case Expr::Kind::sqrt:
      return Expr::square_root(args[0]);
    default:
      return e;
  }
}

namespace {
void collect_vars(const Expr& e, std::set<std::string, std::less<>>& out) {
  if (e.kind() == Expr::Kind::variable) {
    out.insert(e.name());
    return;
  }
  for (const auto& a : e.args()) collect_vars(a, out);
}
}  // namespace

std::set<std::string, std::less<>> free_variables(const Expr& e) {
  std::set<std::string, std::less<>> out;
  collect_vars(e, out);
  return out;
}

std::size_t node_count(const Expr& e) {
  std::size_t n = 1;
  for (const auto& a : e.args()) n += node_count(a);
  return n;
}

}  // namespace isostc
