#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isostc/expr.hpp"

namespace isostc {

class ProblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when w^(alpha+1) f(x/w, e/w) does not cancel to a polynomial.
class HomogenizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A compact set given either as an axis-aligned box or as a sublevel set
/// {V(x) <= level} of a positive definite quadratic form.
struct DomainSpec {
  enum class Shape : std::uint8_t { box, sublevel };

  Shape shape = Shape::box;
  std::vector<std::string> vars;
  std::vector<Interval> box;  // per coordinate (box shape)
  Expr form;                  // sublevel shape
  double level = 0.0;

  static DomainSpec make_box(std::vector<std::string> vars, std::vector<Interval> box);
  /// Throws ProblemError unless `form` is a positive definite quadratic form.
  static DomainSpec make_sublevel(std::vector<std::string> vars, Expr form, double level);

  std::size_t dim() const { return vars.size(); }
  /// Tight bounding box (for sublevel sets: sqrt(level * (P^-1)_ii)).
  std::vector<Interval> hull() const;
  bool contains(std::span<const double> point, double tol = 0.0) const;
  /// Certifies box ∩ domain = ∅ by interval evaluation.
  bool excludes(std::span<const Interval> box) const;
  /// Certifies box ⊆ domain by interval evaluation.
  bool includes(std::span<const Interval> box) const;
  /// True when the closed ball of the given radius lies in the interior.
  bool strictly_contains_ball(double radius) const;

 private:
  std::vector<std::vector<double>> quad_;  // symmetric P with V = x'Px
  double lambda_max_ = 0.0;
};

/// Homogeneous (or homogenized) ETC instance on R^N x R^N where N = n, or
/// n + 1 after homogenization.
struct EtcProblem {
  int n = 0;  // dimension of the original plant
  std::vector<std::string> state_vars;  // x1..xn [, w]
  std::vector<std::string> error_vars;  // e1..en [, ew]
  std::vector<Expr> f_closed;           // size N, in (state, error)
  std::vector<Expr> field;              // F = [f_closed; -f_closed], size 2N
  Expr phi;
  int alpha = 1;
  int theta = 1;
  int p = 1;
  double eps_margin = 1e-3;
  double d = 1.0;
  double r = 0.1;
  DomainSpec Z;
  DomainSpec Xi;
  bool homogenized = false;
  int w_index = -1;  // index of w in state_vars when homogenized

  std::size_t state_dim() const { return state_vars.size(); }
  /// state_vars followed by error_vars.
  std::vector<std::string> coordinates() const;
};

struct LieChain {
  std::vector<std::string> coords;
  std::vector<Expr> exprs;  // L_F^0 phi .. L_F^p phi

  int order() const { return static_cast<int>(exprs.size()) - 1; }
};

/// Binds control inputs u1..um, given as functions of x, at x + e.
std::vector<Expr> substitute_control(const std::vector<Expr>& f, const std::vector<Expr>& u, int n);

/// F_i = f_i, F_{N+i} = -f_i.
std::vector<Expr> extend(const std::vector<Expr>& f_closed);

/// [phi, L_F phi, ..., L_F^p phi]. Polynomial entries are kept in expanded form.
LieChain lie_chain(const std::vector<Expr>& field, const Expr& phi, int p, const std::vector<std::string>& coords);

inline LieChain lie_chain(const EtcProblem& problem) {
  return lie_chain(problem.field, problem.phi, problem.p, problem.coordinates());
}

struct HomogeneityReport {
  bool passed = true;
  double worst_violation = 0.0;  // relative
  int worst_component = -1;
};

/// Checks g_i(lambda x) = lambda^(degree+1) g_i(x) at random unit-sphere
/// points for lambda in {0.5, 2, 3}, relative tolerance 1e-9.
HomogeneityReport check_homogeneity(const std::vector<Expr>& g, int degree, int trials,
                                    const std::vector<std::string>& coords, std::uint64_t seed = 7);

struct HomogenizedSystem {
  std::vector<std::string> state_vars;  // x1..xn, w
  std::vector<std::string> error_vars;  // e1..en, ew
  std::vector<Expr> f_closed;           // n + 1 entries, last is 0
  Expr phi;
};

/// Embeds (f_closed, phi) in R^(n+1) with the constant auxiliary state w:
/// f_i -> w^(alpha+1) f_i(x/w, e/w), phi -> w^(theta+1) phi(x/w, e/w).
HomogenizedSystem homogenize(const std::vector<Expr>& f_closed, const Expr& phi, int alpha, int theta, int n);

/// Cross-field checks: F = [f; -f], alpha/theta >= 1, D = {|x| = r} inside
/// the interior of Z, Xi inside the closed ball of radius d.
void validate(const EtcProblem& problem);

std::vector<std::string> state_names(int n);
std::vector<std::string> error_names(int n);

}  // namespace isostc
