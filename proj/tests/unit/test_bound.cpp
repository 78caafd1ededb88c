#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "isostc/bound.hpp"
#include "isostc/stc.hpp"

using namespace isostc;
using fixtures::rel;

namespace {

const std::vector<double> kVdpDeltas{0.0, 5e-7, 0.00181, 1e-12};

// Classical RK4 on psi' = A psi.
Eigen::VectorXd rk4_flow(const Eigen::MatrixXd& A, Eigen::VectorXd y, double s, int steps) {
  const double h = s / steps;
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd k1 = A * y;
    const Eigen::VectorXd k2 = A * (y + 0.5 * h * k1);
    const Eigen::VectorXd k3 = A * (y + 0.5 * h * k2);
    const Eigen::VectorXd k4 = A * (y + h * k3);
    y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y;
}

MuBound example1_bound(const std::vector<double>& deltas) {
  const auto& P = fixtures::example1().problem;
  DeltaVector dv;
  dv.deltas = deltas;
  return MuBound(P, lie_chain(P), dv);
}

std::vector<double> random_in(const DomainSpec& Z, std::mt19937_64& rng) {
  const auto hull = Z.hull();
  for (;;) {
    std::vector<double> x;
    for (const auto& iv : hull) x.push_back(std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng));
    double s = 0.0;
    for (double v : x) s += v * v;
    if (Z.contains(x) && s > 1e-8 * hull[0].width() * hull[0].width()) return x;
  }
}

}  // namespace

TEST_CASE("comparison matrix layout") {
  const ComparisonMatrix m1 = build_matrix({0.25, 0.5});
  CHECK(m1.A.rows() == 2);
  CHECK(m1.A(0, 0) == 0.25);
  CHECK(m1.A(0, 1) == 1.0);
  CHECK(m1.A(1, 0) == 0.0);
  CHECK(m1.A(1, 1) == 0.0);

  const ComparisonMatrix m3 = build_matrix({0.0, 0.0, 0.0, 2.0});
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j <= i; ++j) CHECK(m3.A(i, j) == 0.0);
  }
  CHECK(m3.A(0, 1) == 1.0);
  CHECK(m3.A(2, 3) == 1.0);

  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const auto d = fixtures::uniform(rng, 1 + (k % 8) + 1, 0.0, 2.0);
    const auto A = build_matrix(d).A;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      for (Eigen::Index j = 0; j < A.cols(); ++j) {
        if (i != j) CHECK(A(i, j) >= 0.0);
      }
    }
  }
  CHECK_THROWS_AS(build_matrix({0.1, -1.0}), BoundError);
  CHECK_THROWS_AS(build_matrix(std::vector<double>(10, 0.1)), BoundError);
}

TEST_CASE("expm") {
  const auto A = build_matrix({0.0, 0.0, 0.0, 0.7}).A;
  CHECK(expm(A, 0.0).isApprox(Eigen::MatrixXd::Identity(4, 4)));
  // Nilpotent: the series terminates.
  const Eigen::Vector4d v(-1.0, 0.3, 0.2, 0.7);
  for (double s : {0.1, 1.0, 3.0}) {
    const double series = v(0) + v(1) * s + v(2) * s * s / 2 + v(3) * s * s * s / 6;
    CHECK(rel(expm(A, s).row(0).dot(v), series) <= 1e-13);
  }

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> off(0.0, 1.0);
  std::uniform_real_distribution<double> diag(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd M(4, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) M(i, j) = i == j ? diag(rng) : off(rng);
    }
    Eigen::VectorXd y0(4);
    for (int i = 0; i < 4; ++i) y0(i) = off(rng);
    for (double s : {0.5, 2.0, 5.0}) {
      const Eigen::VectorXd a = expm(M, s) * y0;
      const Eigen::VectorXd b = rk4_flow(M, y0, s, 20000);
      CHECK((a - b).norm() <= 1e-9 * b.norm());
    }
  }
}

TEST_CASE("expm is entrywise nonnegative for nonnegative deltas") {
  for (const auto& d : {fixtures::published_deltas, kVdpDeltas}) {
    const auto A = build_matrix(d).A;
    for (int k = 0; k <= 100; ++k) CHECK(expm(A, 0.1 * k).minCoeff() >= 0.0);
  }
}

TEST_CASE("mu at t = 0 is phi and mu scales exactly") {
  const auto& P = fixtures::example1().problem;
  const MuBound bound = example1_bound(fixtures::published_deltas);
  const CompiledExpr phi(P.phi, P.coordinates());
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto x = fixtures::uniform(rng, 2, -2.0, 2.0);
    CHECK(rel(bound.mu(x, 0.0), phi.eval(std::vector<double>{x[0], x[1], 0.0, 0.0})) <= 1e-12);
    const double lambda = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    const double t = std::uniform_real_distribution<double>(0.0, 0.05)(rng);
    const std::vector<double> lx{lambda * x[0], lambda * x[1]};
    const double lhs = bound.mu(lx, t);
    const double rhs = std::pow(lambda, P.theta + 1) * bound.mu(x, std::pow(lambda, P.alpha) * t);
    CHECK(rel(lhs, rhs) <= 1e-12);
  }
  CHECK_THROWS_AS(bound.mu(std::vector<double>{0.0, 0.0}, 0.1), UndefinedInput);
}

TEST_CASE("tau_down is a root, scales exactly and is unique") {
  const auto& P = fixtures::example1().problem;
  const MuBound bound = example1_bound(fixtures::published_deltas);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 50; ++k) {
    const double a = std::uniform_real_distribution<double>(0.0, 6.283185307179586)(rng);
    const std::vector<double> u{P.r * std::cos(a), P.r * std::sin(a)};
    const TauDown td = bound.tau_down(u);
    CHECK(std::fabs(bound.mu(u, td.value)) <= 1e-9 * bound.delta_p());
    const std::vector<double> u2{2 * u[0], 2 * u[1]};
    CHECK(rel(bound.tau_down(u2).value, std::pow(2.0, -P.alpha) * td.value) <= 1e-15);
    // No other sign change of mu(u, .) on a fine grid.
    int changes = 0;
    double prev = bound.mu(u, 0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double cur = bound.mu(u, 4.0 * td.value * i / 1000);
      CHECK(cur > prev);
      if ((cur > 0.0) != (prev > 0.0)) ++changes;
      prev = cur;
    }
    CHECK(changes == 1);
  }
  CHECK_THROWS_AS(bound.tau_down(std::vector<double>{0.0, 0.0}), UndefinedInput);
}

TEST_CASE("tau_down reports violated margins") {
  EtcProblem P = fixtures::example1().problem;
  P.phi = parse("e1^2 + x1*x2", Alphabet::state_and_error(2, false));
  DeltaVector dv;
  dv.deltas = fixtures::published_deltas;
  const MuBound bound(P, lie_chain(P), dv);
  CHECK_THROWS_AS(bound.tau_down(std::vector<double>{0.2, 0.2}), InvalidBound);
  CHECK_NOTHROW(bound.tau_down(std::vector<double>{0.2, -0.2}));
}

TEST_CASE("psi1, eta1 and the clamped initial vector") {
  const auto& P = fixtures::vdp().problem;
  DeltaVector dv;
  dv.deltas = kVdpDeltas;
  const MuBound bound(P, lie_chain(P), dv);
  const CompiledExpr phi(P.phi, P.coordinates());
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const auto x = random_in(P.Z, rng);
    std::vector<double> xi(6, 0.0);
    std::copy(x.begin(), x.end(), xi.begin());
    CHECK(rel(psi1(bound, xi, 0.0), phi.eval(xi)) <= 1e-12);
    double prev = eta1(bound, x, 0.0);
    for (int i = 1; i <= 40; ++i) {
      const double t = 0.005 * i;
      const double e = eta1(bound, x, t);
      CHECK(e >= psi1(bound, xi, t) - 1e-15);
      CHECK(e >= prev);
      prev = e;
    }
  }
}

TEST_CASE("mu dominates phi along trajectories until the first crossing") {
  const auto& P = fixtures::vdp().problem;
  DeltaVector dv;
  dv.deltas = kVdpDeltas;
  const MuBound bound(P, lie_chain(P), dv);
  const CompiledExpr phi(P.phi, P.coordinates());
  std::mt19937_64 rng(6);
  for (int k = 0; k < 20; ++k) {
    const auto x = random_in(P.Z, rng);
    const TauDown td = bound.tau_down(x);
    // Without a crossing inside the window tau(x) exceeds it.
    const OracleResult oracle = tau_oracle(P, x, 4 * td.value);
    const double end = oracle.tau ? *oracle.tau : 4 * td.value;
    if (oracle.tau) CHECK(td.value <= *oracle.tau);
    std::vector<double> y(6, 0.0);
    std::copy(x.begin(), x.end(), y.begin());
    const Trajectory traj = integrate(extended_rhs(P), y, 0.0, end);
    for (int i = 0; i <= 50; ++i) {
      const double t = end * i / 50;
      const double ph = phi.eval(traj.at(t));
      CHECK(bound.mu(x, t) >= ph - 1e-12 * std::fabs(ph));
    }
  }
}
