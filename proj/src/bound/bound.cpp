#include "isostc/bound.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace isostc {

ComparisonMatrix build_matrix(const std::vector<double>& deltas) {
  if (deltas.size() < 2) throw BoundError("need at least delta_0 and delta_p");
  const int p = static_cast<int>(deltas.size()) - 1;
  if (p > 8) throw BoundError("Lie order above 8 is not supported");
  for (double v : deltas) {
    if (v < 0.0) throw BoundError("deltas must be nonnegative");
  }
  ComparisonMatrix out;
  out.p = p;
  out.A = Eigen::MatrixXd::Zero(p + 1, p + 1);
  for (int i = 0; i + 1 < p; ++i) out.A(i, i + 1) = 1.0;
  for (int j = 0; j < p; ++j) out.A(p - 1, j) = deltas[static_cast<std::size_t>(j)];
  out.A(p - 1, p) = 1.0;
  return out;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& A, double s) {
  if (s < 0.0) throw BoundError("expm needs s >= 0");
  if (s == 0.0) return Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::MatrixXd E = (A * s).exp();
  for (Eigen::Index i = 0; i < E.size(); ++i) {
    double& v = E.data()[i];
    if (v < 0.0 && v >= -1e-12) v = 0.0;
  }
  return E;
}

MuBound::MuBound(const EtcProblem& problem, const LieChain& chain, const DeltaVector& delta)
    : A_(build_matrix(delta.deltas)),
      delta_p_(delta.delta_p()),
      r_(problem.r),
      alpha_(problem.alpha),
      theta_(problem.theta),
      n_(problem.state_dim()) {
  if (!(r_ > 0.0)) throw BoundError("sphere radius must be positive");
  if (chain.order() != delta.p()) throw BoundError("Lie chain order differs from the delta vector");
  for (int i = 0; i < chain.order(); ++i) lie_.emplace_back(chain.exprs[static_cast<std::size_t>(i)], chain.coords);
}

Eigen::VectorXd MuBound::lie_vector(std::span<const double> xi) const {
  const int p = A_.p;
  Eigen::VectorXd v(p + 1);
  for (int i = 0; i < p; ++i) v(i) = lie_[static_cast<std::size_t>(i)].eval(xi);
  v(p) = delta_p_;
  return v;
}

Eigen::VectorXd MuBound::clamped_vector(std::span<const double> x) const {
  std::vector<double> xi(2 * n_, 0.0);
  std::copy(x.begin(), x.end(), xi.begin());
  Eigen::VectorXd v = lie_vector(xi);
  for (int i = 1; i < A_.p; ++i) v(i) = std::max(v(i), 0.0);
  return v;
}

std::vector<Interval> MuBound::lie_enclosure(std::span<const Interval> box) const {
  std::vector<Interval> xi(2 * n_, Interval(0.0));
  std::copy(box.begin(), box.end(), xi.begin());
  std::vector<Interval> out;
  std::vector<Interval> scratch;
  for (const auto& c : lie_) out.push_back(c.eval(std::span<const Interval>(xi), scratch));
  return out;
}

namespace {

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

MuBound::Ray MuBound::ray(std::span<const double> x) const {
  if (x.size() != n_) throw BoundError("state dimension mismatch");
  const double nx = norm(x);
  if (nx == 0.0) throw UndefinedInput("mu is undefined at the origin");
  std::vector<double> xd(x.begin(), x.end());
  for (auto& v : xd) v *= r_ / nx;
  return {nx / r_, clamped_vector(xd)};
}

double MuBound::mu(const Ray& ray, double t) const {
  const double s = std::pow(ray.lambda, alpha_) * t;
  return std::pow(ray.lambda, theta_ + 1) * expm(A_.A, s).row(0).dot(ray.v);
}

double MuBound::mu(std::span<const double> x, double t) const { return mu(ray(x), t); }

TauDown MuBound::sphere_root(std::span<const double> u) const {
  const Eigen::VectorXd v = clamped_vector(u);
  auto f = [&](double s) { return expm(A_.A, s).row(0).dot(v); };
  if (v(0) >= 0.0) throw InvalidBound("mu(x_D, 0) >= 0: deltas violate the margin condition here");
  double lo = 0.0;
  double hi = 1e-3;
  constexpr double kTmax = 1e6;
  while (f(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > kTmax) throw HorizonError("no sign change of mu below t_max");
  }
  const double tol = 1e-12 * hi;
  while (hi - lo > tol) {
    const double m = 0.5 * (lo + hi);
    if (f(m) <= 0.0) {
      lo = m;
    } else {
      hi = m;
    }
  }
  TauDown out;
  out.t_lo = lo;
  out.t_hi = hi;
  out.value = lo;
  out.residual = f(lo);
  return out;
}

TauDown MuBound::tau_down(std::span<const double> x) const {
  if (x.size() != n_) throw BoundError("state dimension mismatch");
  const double nx = norm(x);
  if (nx == 0.0) throw UndefinedInput("tau_down is undefined at the origin");
  std::vector<double> xd(x.begin(), x.end());
  for (auto& v : xd) v *= r_ / nx;
  TauDown root = sphere_root(xd);
  root.value *= std::pow(nx / r_, -alpha_);
  return root;
}

double psi1(const MuBound& bound, std::span<const double> xi0, double t) {
  return expm(bound.matrix().A, t).row(0).dot(bound.lie_vector(xi0));
}

double eta1(const MuBound& bound, std::span<const double> x, double t) {
  return expm(bound.matrix().A, t).row(0).dot(bound.clamped_vector(x));
}

}  // namespace isostc
