#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "isostc/interval.hpp"

namespace isostc {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Point evaluation failures: division by zero, sqrt of a negative, unbound variable.
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable expression tree with value semantics. Copies share nodes.
///
/// Sums and products are n-ary. Powers carry a signed integer exponent.
class Expr {
 public:
  enum class Kind : std::uint8_t { constant, variable, sum, product, quotient, negation, power, sqrt };

  Expr();  // constant 0
  Expr(double value);  // NOLINT(google-explicit-constructor)

  static Expr constant(double value);
  static Expr variable(std::string name);
  static Expr sum(std::vector<Expr> terms);
  static Expr product(std::vector<Expr> factors);
  static Expr quotient(Expr num, Expr den);
  static Expr negation(Expr arg);
  static Expr power(Expr base, int exponent);
  static Expr square_root(Expr arg);

  Kind kind() const;
  double value() const;             // constant only
  const std::string& name() const;  // variable only
  int exponent() const;             // power only
  const std::vector<Expr>& args() const;

  bool is_constant() const { return kind() == Kind::constant; }
  bool is_constant(double v) const { return is_constant() && value() == v; }

  /// Structural equality of the trees.
  friend bool operator==(const Expr& a, const Expr& b);
  /// Identity of the shared root node (used for memoisation).
  const void* id() const { return node_.get(); }

  struct Node;

 private:
  explicit Expr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

using Env = std::map<std::string, double, std::less<>>;
using IntervalBox = std::map<std::string, Interval, std::less<>>;

/// Variables admissible in a problem instance. An empty alphabet accepts
/// every identifier.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::set<std::string, std::less<>> names) : names_(std::move(names)) {}

  /// x1..xn, e1..en, plus w and ew when `with_w`.
  static Alphabet state_and_error(int n, bool with_w);

  bool accepts(std::string_view name) const { return names_.empty() || names_.contains(name); }
  const std::set<std::string, std::less<>>& names() const { return names_; }

 private:
  std::set<std::string, std::less<>> names_;
};

/// Grammar: infix + - * / ^ with the usual precedence, unary minus,
/// parentheses, `sqrt(...)`, identifiers and decimal literals. The right
/// operand of `^` must be an integer literal, optionally negated.
Expr parse(std::string_view text, const Alphabet& alphabet = {});

/// Prints in the same grammar accepted by parse().
std::string to_string(const Expr& e);

double eval(const Expr& e, const Env& env);

/// Natural interval extension. Integer powers use the even/odd rule.
Interval interval_eval(const Expr& e, const IntervalBox& box);

/// Exact partial derivative, simplified.
Expr diff(const Expr& e, std::string_view var);

/// Constant folding, flattening and 0/1 identities. Idempotent.
Expr simplify(const Expr& e);

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& bindings);

std::set<std::string, std::less<>> free_variables(const Expr& e);

std::size_t node_count(const Expr& e);

/// Sparse multivariate Laurent polynomial over a fixed variable ordering.
class Polynomial {
 public:
  using Exponents = std::vector<int>;

  explicit Polynomial(std::vector<std::string> vars) : vars_(std::move(vars)) {}

  const std::vector<std::string>& variables() const { return vars_; }
  const std::map<Exponents, double>& terms() const { return terms_; }

  void add_term(const Exponents& exps, double coeff);
  bool has_negative_exponents() const;
  int total_degree() const;

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial scaled(double s) const;
  Polynomial pow(int n) const;

  static Polynomial constant(std::vector<std::string> vars, double c);

 private:
  std::vector<std::string> vars_;
  std::map<Exponents, double> terms_;
};

/// Expands `e` into a Laurent polynomial. Returns nothing when the tree
/// contains sqrt, or a quotient/negative power whose denominator is not a
/// single monomial.
std::optional<Polynomial> to_polynomial(const Expr& e, const std::vector<std::string>& vars);

/// Canonical sum-of-monomials tree (terms in exponent order).
Expr from_polynomial(const Polynomial& p);

/// Expands to canonical polynomial form when possible, otherwise simplify().
Expr normalize(const Expr& e, const std::vector<std::string>& vars);

/// Straight-line program compiled from an Expr with common subexpressions
/// merged. Evaluation is thread-safe; scratch buffers are per call.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e, std::vector<std::string> vars);

  const std::vector<std::string>& variables() const { return vars_; }
  std::size_t size() const { return ops_.size(); }

  double eval(std::span<const double> point) const;
  Interval eval(std::span<const Interval> box) const;
  Interval eval(std::span<const Interval> box, std::vector<Interval>& scratch) const;

 private:
  enum class Op : std::uint8_t { constant, variable, add, sub, mul, div, neg, pow, sqrt };
  struct Instr {
    Op op;
    int a = -1;
    int b = -1;
    int k = 0;  // variable index or exponent
    double c = 0.0;
  };
  int emit(const Expr& e, std::map<std::string, int>& memo);

  std::vector<std::string> vars_;
  std::vector<Instr> ops_;
  int root_ = -1;
};

}  // namespace isostc
