#include "isostc/dynamics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

namespace isostc {

std::vector<std::string> state_names(int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back("x" + std::to_string(i));
  return out;
}

std::vector<std::string> error_names(int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back("e" + std::to_string(i));
  return out;
}

std::vector<std::string> EtcProblem::coordinates() const {
  std::vector<std::string> out = state_vars;
  out.insert(out.end(), error_vars.begin(), error_vars.end());
  return out;
}

// ---------------------------------------------------------------------------
// domains

DomainSpec DomainSpec::make_box(std::vector<std::string> vars, std::vector<Interval> box) {
  if (vars.size() != box.size()) throw ProblemError("box dimension does not match its variable list");
  for (const auto& iv : box) {
    if (!(iv.lo <= iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
      throw ProblemError("box bounds must be finite with lo <= hi");
    }
  }
  DomainSpec d;
  d.shape = Shape::box;
  d.vars = std::move(vars);
  d.box = std::move(box);
  return d;
}

DomainSpec DomainSpec::make_sublevel(std::vector<std::string> vars, Expr form, double level) {
  if (!(level > 0.0)) throw ProblemError("sublevel set needs a positive level");
  auto poly = to_polynomial(form, vars);
  if (!poly) throw ProblemError("sublevel form is not a polynomial in " + std::to_string(vars.size()) + " variables");
  const std::size_t n = vars.size();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& [exps, c] : poly->terms()) {
    int deg = 0;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      deg += exps[i];
      for (int k = 0; k < exps[i]; ++k) idx.push_back(i);
    }
    if (deg != 2) throw ProblemError("sublevel form must be a homogeneous quadratic");
    const auto a = static_cast<Eigen::Index>(idx[0]);
    const auto b = static_cast<Eigen::Index>(idx[1]);
    if (a == b) {
      P(a, a) += c;
    } else {
      P(a, b) += 0.5 * c;
      P(b, a) += 0.5 * c;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
  if (eig.eigenvalues().minCoeff() <= 0.0) throw ProblemError("sublevel form is not positive definite");

  DomainSpec d;
  d.shape = Shape::sublevel;
  d.vars = std::move(vars);
  d.form = std::move(form);
  d.level = level;
  d.quad_.assign(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d.quad_[i][j] = P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  d.lambda_max_ = eig.eigenvalues().maxCoeff();
  const Eigen::MatrixXd Pinv = P.inverse();
  for (std::size_t i = 0; i < n; ++i) {
    const double h = std::sqrt(level * Pinv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    d.box.push_back(detail::widen(-h, h));
  }
  return d;
}

std::vector<Interval> DomainSpec::hull() const { return box; }

bool DomainSpec::contains(std::span<const double> point, double tol) const {
  if (shape == Shape::box) {
    for (std::size_t i = 0; i < box.size(); ++i) {
      if (point[i] < box[i].lo - tol || point[i] > box[i].hi + tol) return false;
    }
    return true;
  }
  double v = 0.0;
  for (std::size_t i = 0; i < quad_.size(); ++i) {
    for (std::size_t j = 0; j < quad_.size(); ++j) v += quad_[i][j] * point[i] * point[j];
  }
  return v <= level + tol;
}

bool DomainSpec::strictly_contains_ball(double radius) const {
  if (shape == Shape::box) {
    return std::all_of(box.begin(), box.end(), [&](const Interval& iv) { return radius < -iv.lo && radius < iv.hi; });
  }
  return radius * radius * lambda_max_ < level;
}

namespace {

Interval quad_enclosure(const std::vector<std::vector<double>>& P, std::span<const Interval> box) {
  Interval v(0.0);
  for (std::size_t i = 0; i < P.size(); ++i) {
    v = v + Interval(P[i][i]) * pow(box[i], 2);
    for (std::size_t j = i + 1; j < P.size(); ++j) v = v + Interval(2.0 * P[i][j]) * box[i] * box[j];
  }
  return v;
}

}  // namespace

bool DomainSpec::excludes(std::span<const Interval> b) const {
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (b[i].hi < box[i].lo || b[i].lo > box[i].hi) return true;
  }
  if (shape == Shape::box) return false;
  return quad_enclosure(quad_, b).lo > level;
}

bool DomainSpec::includes(std::span<const Interval> b) const {
  if (shape == Shape::box) {
    for (std::size_t i = 0; i < box.size(); ++i) {
      if (b[i].lo < box[i].lo || b[i].hi > box[i].hi) return false;
    }
    return true;
  }
  return quad_enclosure(quad_, b).hi <= level;
}

// ---------------------------------------------------------------------------
// construction

std::vector<Expr> substitute_control(const std::vector<Expr>& f, const std::vector<Expr>& u, int n) {
  if (static_cast<int>(f.size()) != n) {
    throw ProblemError("dimension mismatch: " + std::to_string(f.size()) + " dynamics for n = " + std::to_string(n));
  }
  std::map<std::string, Expr, std::less<>> at_sample;
  for (int i = 1; i <= n; ++i) {
    const std::string k = std::to_string(i);
    at_sample.emplace("x" + k, Expr::variable("x" + k) + Expr::variable("e" + k));
  }
  std::map<std::string, Expr, std::less<>> controls;
  for (std::size_t j = 0; j < u.size(); ++j) {
    controls.emplace("u" + std::to_string(j + 1), substitute(u[j], at_sample));
  }
  std::vector<Expr> out;
  out.reserve(f.size());
  for (const auto& fi : f) {
    for (const auto& v : free_variables(fi)) {
      if (v.size() > 1 && v[0] == 'u' && !controls.contains(v)) {
        throw ProblemError("dimension mismatch: control '" + v + "' has no definition");
      }
    }
    out.push_back(simplify(substitute(fi, controls)));
  }
  return out;
}

std::vector<Expr> extend(const std::vector<Expr>& f_closed) {
  std::vector<Expr> F = f_closed;
  for (const auto& fi : f_closed) F.push_back(Expr::negation(fi));
  return F;
}

LieChain lie_chain(const std::vector<Expr>& field, const Expr& phi, int p, const std::vector<std::string>& coords) {
  if (p < 1) throw ProblemError("Lie order p must be at least 1");
  if (field.size() != coords.size()) throw ProblemError("field and coordinate list differ in length");
  LieChain chain;
  chain.coords = coords;
  chain.exprs.push_back(normalize(phi, coords));
  for (int k = 1; k <= p; ++k) {
    const Expr& prev = chain.exprs.back();
    std::vector<Expr> terms;
    for (std::size_t j = 0; j < coords.size(); ++j) {
      if (field[j].is_constant(0.0)) continue;
      Expr g = diff(prev, coords[j]);
      if (g.is_constant(0.0)) continue;
      terms.push_back(g * field[j]);
    }
    chain.exprs.push_back(normalize(Expr::sum(std::move(terms)), coords));
  }
  return chain;
}

HomogeneityReport check_homogeneity(const std::vector<Expr>& g, int degree, int trials,
                                    const std::vector<std::string>& coords, std::uint64_t seed) {
  HomogeneityReport report;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<CompiledExpr> compiled;
  for (const auto& gi : g) compiled.emplace_back(gi, coords);
  std::vector<double> xi(coords.size());
  std::vector<double> scaled(coords.size());
  for (int t = 0; t < trials; ++t) {
    double norm = 0.0;
    for (auto& v : xi) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : xi) v /= norm;
    for (double lambda : {0.5, 2.0, 3.0}) {
      for (std::size_t k = 0; k < xi.size(); ++k) scaled[k] = lambda * xi[k];
      const double factor = std::pow(lambda, degree + 1);
      for (std::size_t i = 0; i < compiled.size(); ++i) {
        const double lhs = compiled[i].eval(scaled);
        const double rhs = factor * compiled[i].eval(xi);
        const double den = std::max({std::fabs(lhs), std::fabs(rhs), 1e-12 * factor});
        const double rel = std::fabs(lhs - rhs) / den;
        if (rel > report.worst_violation) {
          report.worst_violation = rel;
          report.worst_component = static_cast<int>(i);
        }
      }
    }
  }
  report.passed = report.worst_violation <= 1e-9;
  return report;
}

HomogenizedSystem homogenize(const std::vector<Expr>& f_closed, const Expr& phi, int alpha, int theta, int n) {
  if (alpha < 1 || theta < 1) throw ProblemError("homogenization degrees must be at least 1");
  HomogenizedSystem out;
  out.state_vars = state_names(n);
  out.state_vars.push_back("w");
  out.error_vars = error_names(n);
  out.error_vars.push_back("ew");
  std::vector<std::string> coords = out.state_vars;
  coords.insert(coords.end(), out.error_vars.begin(), out.error_vars.end());

  const Expr w = Expr::variable("w");
  std::map<std::string, Expr, std::less<>> scaled;
  for (int i = 1; i <= n; ++i) {
    const std::string k = std::to_string(i);
    scaled.emplace("x" + k, Expr::variable("x" + k) / w);
    scaled.emplace("e" + k, Expr::variable("e" + k) / w);
  }
  auto lift = [&](const Expr& e, int degree, const std::string& what) {
    Expr lifted = Expr::power(w, degree + 1) * substitute(e, scaled);
    auto poly = to_polynomial(lifted, coords);
    if (!poly || poly->has_negative_exponents()) {
      throw HomogenizeError(what + " is not polynomial-homogenizable at degree " + std::to_string(degree));
    }
    return from_polynomial(*poly);
  };
  for (int i = 0; i < n; ++i) {
    out.f_closed.push_back(lift(f_closed[static_cast<std::size_t>(i)], alpha, "f" + std::to_string(i + 1)));
  }
  out.f_closed.push_back(Expr::constant(0.0));
  out.phi = lift(phi, theta, "phi");
  return out;
}

void validate(const EtcProblem& problem) {
  const std::size_t N = problem.state_vars.size();
  if (problem.error_vars.size() != N || problem.f_closed.size() != N) {
    throw ProblemError("state, error and dynamics dimensions differ");
  }
  if (problem.field.size() != 2 * N) throw ProblemError("extended field must have 2N components");
  for (std::size_t i = 0; i < N; ++i) {
    if (!(problem.field[i] == problem.f_closed[i]) || problem.field[N + i].kind() != Expr::Kind::negation ||
        !(problem.field[N + i].args()[0] == problem.f_closed[i])) {
      throw ProblemError("extended field is not [f; -f]");
    }
  }
  if (problem.alpha < 1) throw ProblemError("alpha must be at least 1");
  if (problem.theta < 1) throw ProblemError("theta must be at least 1");
  if (problem.p < 1) throw ProblemError("p must be at least 1");
  if (!(problem.eps_margin > 0.0)) throw ProblemError("eps_margin must be positive");
  if (!(problem.d > 0.0)) throw ProblemError("d must be positive");
  if (!(problem.r > 0.0)) throw ProblemError("r must be positive");

  if (problem.Z.dim() != N) throw ProblemError("Z must be declared over the state coordinates");
  if (!problem.Z.strictly_contains_ball(problem.r)) throw ProblemError("sphere D of radius r is not inside int(Z)");

  if (problem.Xi.dim() != 2 * N) throw ProblemError("Xi must be declared over state and error coordinates");
  Interval sq(0.0);
  for (const auto& iv : problem.Xi.hull()) sq = sq + pow(iv, 2);
  if (sq.hi > problem.d * problem.d) throw ProblemError("Xi is not contained in the ball of radius d");
}

}  // namespace isostc
