#include <doctest.h>

#include <numbers>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "isostc/stc.hpp"

using namespace isostc;
using fixtures::rel;

namespace {

const std::vector<double> kVdpDeltas{0.0, 5e-7, 0.00181, 1e-12};

MuBound make_bound(const Config& cfg, const std::vector<double>& deltas) {
  DeltaVector dv;
  dv.deltas = deltas;
  return MuBound(cfg.problem, lie_chain(cfg.problem), dv);
}

Rhs linear(double a) {
  return [a](double, std::span<const double> y, std::span<double> dy) {
    for (std::size_t i = 0; i < y.size(); ++i) dy[i] = a * y[i];
  };
}

}  // namespace

TEST_CASE("time grids") {
  const TimeGrid g = make_grid(1.0, 2.0, 2);
  REQUIRE(g.times.size() == 2);
  CHECK(g.tau(1) == 0.5);
  CHECK(g.tau(2) == 1.0);

  const TimeGrid e1 = make_grid(0.1, 1.01 * 1.01, 348);
  CHECK(e1.tau(348) == 0.1);
  CHECK(rel(e1.tau(1), 0.1 * std::pow(1.01, -694)) <= 1e-12);
  for (int i = 1; i < 348; ++i) CHECK(e1.tau(i) < e1.tau(i + 1));
  const TimeGrid v = make_grid(0.01, 1.05 * 1.05, 126);
  CHECK(rel(v.tau(1), 0.01 * std::pow(1.05, -250)) <= 1e-12);

  CHECK_THROWS_AS(make_grid(1.0, 2.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(1.0, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(0.0, 2.0, 4), std::invalid_argument);
}

TEST_CASE("region lookup") {
  const auto& cfg = fixtures::example1();
  const MuBound bound = make_bound(cfg, fixtures::published_deltas);
  const TimeGrid& grid = *cfg.grid;
  const std::vector<double> u{0.29 * 0.6, 0.29 * 0.8};
  const double tu = bound.tau_down(u).value;
  const double lambda = std::sqrt(tu / 0.07);
  const std::vector<double> x{lambda * u[0], lambda * u[1]};
  CHECK(rel(bound.tau_down(x).value, 0.07) <= 1e-12);
  int expected = 0;
  for (int i = 1; i <= grid.q; ++i) {
    if (grid.tau(i) <= 0.07) expected = i;
  }
  CHECK(region_index(bound, grid, x) == expected);

  const double big = std::sqrt(tu / (0.5 * grid.tau(1)));
  CHECK_THROWS_AS(region_index(bound, grid, std::vector<double>{big * u[0], big * u[1]}), OutsideOuterRegion);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> logr(-3.0, 1.5);
  int outside = 0;
  for (int k = 0; k < 10000; ++k) {
    const double a = angle(rng);
    const double r = std::pow(10.0, logr(rng));
    const std::vector<double> p{r * std::cos(a), r * std::sin(a)};
    int fast = -1;
    int slow = -1;
    try {
      fast = region_index(bound, grid, p);
    } catch (const OutsideOuterRegion&) {
      fast = 0;
    }
    try {
      slow = region_index_linear(bound, grid, p);
    } catch (const OutsideOuterRegion&) {
      slow = 0;
    }
    if (fast == 0) ++outside;
    CHECK(fast == slow);
  }
  CHECK(outside > 0);
}

TEST_CASE("coverage of the operating box") {
  const auto& cfg = fixtures::example1();
  const MuBound bound = make_bound(cfg, fixtures::published_deltas);
  const TimeGrid& grid = *cfg.grid;
  const ManifoldCloud cloud = manifold_points(bound, grid.tau(1), 4096, 1);
  double rho = INFINITY;
  for (double v : cloud.rho) rho = std::min(rho, v);
  // Between cloud directions rho varies smoothly; keep a 1% margin.
  const double h = 0.99 * rho / std::sqrt(2.0);
  const std::vector<Interval> inside{Interval(-h, h), Interval(-h, h)};
  CHECK(check_coverage(bound, grid, inside).status == CoverageOutcome::Status::certified);

  const double far = 1.5 * cloud.rho[0];
  const std::vector<double> w{far * 1.0, 0.0};
  REQUIRE(bound.mu(w, grid.tau(1)) > 0.0);
  const std::vector<Interval> outside{Interval(-far * 1.1, far * 1.1), Interval(-0.1, 0.1)};
  const CoverageOutcome bad = check_coverage(bound, grid, outside);
  REQUIRE(bad.status == CoverageOutcome::Status::counterexample);
  CHECK(bound.mu(bad.witness, grid.tau(1)) > 0.0);

  const std::vector<Interval> point_in{Interval(0.5 * h), Interval(0.25 * h)};
  CHECK(check_coverage(bound, grid, point_in).status == CoverageOutcome::Status::certified);
  const std::vector<Interval> point_out{Interval(w[0]), Interval(w[1])};
  CHECK(check_coverage(bound, grid, point_out).status == CoverageOutcome::Status::counterexample);
}

TEST_CASE("manifold clouds") {
  const auto& cfg = fixtures::example1();
  const MuBound bound = make_bound(cfg, fixtures::published_deltas);
  const ManifoldCloud a = manifold_points(bound, 0.01, 256, 1);
  const ManifoldCloud b = manifold_points(bound, 0.05, 256, 1);
  REQUIRE(a.points.size() == 256);
  REQUIRE(b.points.size() == 256);
  for (std::size_t i = 0; i < 256; ++i) {
    CHECK(std::fabs(bound.mu(a.points[i], 0.01)) <= 1e-6 * bound.delta_p());
    CHECK(a.rho[i] > b.rho[i]);
  }
  for (std::size_t i = 0; i < 256; i += 16) {
    const OracleResult r = tau_oracle(cfg.problem, b.points[i], 1.0);
    REQUIRE(r.tau);
    CHECK(*r.tau >= 0.05);
  }
  CHECK_THROWS_AS(manifold_points(bound, 0.0, 4, 1), std::invalid_argument);

  // Higher-dimensional directions are unit vectors.
  for (const auto& u : unit_directions(3, 64, 5)) CHECK(u[0] * u[0] + u[1] * u[1] + u[2] * u[2] == doctest::Approx(1.0));
}

TEST_CASE("integrator accuracy") {
  const std::vector<double> y0{1.0, -2.0};
  const Trajectory t = integrate(linear(-1.0), y0, 0.0, 3.0);
  for (double s : {0.1, 1.0, 2.5, 3.0}) {
    const auto y = t.at(s);
    CHECK(rel(y[0], std::exp(-s)) <= 1e-8);
    CHECK(rel(y[1], -2.0 * std::exp(-s)) <= 1e-8);
  }

  const Rhs osc = [](double, std::span<const double> y, std::span<double> dy) {
    dy[0] = y[1];
    dy[1] = -y[0];
  };
  const Trajectory o = integrate(osc, std::vector<double>{1.0, 0.0}, 0.0, 10.0);
  for (int k = 0; k <= 100; ++k) {
    const auto y = o.at(0.1 * k);
    CHECK(std::fabs(y[0] * y[0] + y[1] * y[1] - 1.0) <= 1e-7);
  }

  const auto& P = fixtures::example1().problem;
  const std::vector<double> xi{1.0, 1.0, 0.0, 0.0};
  IntegratorOptions half;
  half.rtol = 0.5e-9;
  half.atol = 0.5e-12;
  const auto a = integrate(extended_rhs(P), xi, 0.0, 5.0).at(5.0);
  const auto b = integrate(extended_rhs(P), xi, 0.0, 5.0, half).at(5.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(a[i] - b[i]) < 1e-6);
}

TEST_CASE("triggering-time oracle") {
  const auto& jet = fixtures::jet();
  OracleOptions all;
  all.all_crossings = true;
  all.integrator = jet.integrator;
  const OracleResult r = tau_oracle(jet.problem, jet.x0, 5.0, all);
  REQUIRE(r.tau);
  CHECK(*r.tau == doctest::Approx(1.15).epsilon(0.05 / 1.15));
  REQUIRE(r.crossings.size() >= 2);
  CHECK(r.crossings[0].upward);
  CHECK_FALSE(r.crossings[1].upward);

  const auto& P = fixtures::example1().problem;
  std::mt19937_64 rng(9);
  for (int k = 0; k < 10; ++k) {
    const auto x = fixtures::uniform(rng, 2, -0.3, 0.3);
    const std::vector<double> x2{2 * x[0], 2 * x[1]};
    const auto t1 = tau_oracle(P, x, 1e3);
    const auto t2 = tau_oracle(P, x2, 1e3);
    REQUIRE(t1.tau);
    REQUIRE(t2.tau);
    CHECK(rel(*t2.tau, 0.25 * *t1.tau) <= 1e-5);
  }

  // No crossing before the horizon.
  CHECK_FALSE(tau_oracle(P, std::vector<double>{0.01, 0.01}, 1e-3).tau.has_value());
}

TEST_CASE("event-triggered simulation") {
  const auto& cfg = fixtures::example1();
  const EventLog log = simulate_etc(cfg.problem, cfg.x0, cfg.horizon);
  REQUIRE(log.events.size() > 2);
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const Event& e = log.events[i];
    CHECK(e.max_phi <= 1e-9);
    CHECK(e.region == -1);
    if (i + 1 < log.events.size()) {
      CHECK(e.tau > 0.0);
      CHECK(log.events[i + 1].t == doctest::Approx(e.t + e.tau).epsilon(1e-15));
    }
  }
  CHECK(log.events.back().t < cfg.horizon);
}

TEST_CASE("self-triggered simulation is sound per sample") {
  const auto& cfg = fixtures::vdp();
  const MuBound bound = make_bound(cfg, kVdpDeltas);
  StcOptions so;
  so.tau_fallback = cfg.tau_fallback;
  so.check_soundness = true;
  const EventLog log = simulate_stc(cfg.problem, bound, *cfg.grid, cfg.x0, cfg.horizon, so);
  REQUIRE(!log.events.empty());
  for (const auto& e : log.events) {
    CHECK(e.max_phi <= 1e-7);
    // A negative oracle time means no crossing within four assigned periods.
    CHECK((e.oracle_tau < 0.0 || e.tau <= e.oracle_tau));
    CHECK(e.x[2] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("self-triggered samples decrease the Lyapunov function") {
  const auto& cfg = fixtures::example1();
  const MuBound bound = make_bound(cfg, fixtures::published_deltas);
  StcOptions so;
  so.tau_fallback = cfg.tau_fallback;
  const EventLog log = simulate_stc(cfg.problem, bound, *cfg.grid, cfg.x0, cfg.horizon, so);
  double prev = INFINITY;
  for (const auto& e : log.events) {
    const double V = 0.5 * (e.x[0] * e.x[0] + e.x[1] * e.x[1]);
    CHECK(V <= prev);
    prev = V;
    CHECK(e.region >= 1);
  }
}

TEST_CASE("event CSV layout") {
  EventLog log;
  log.state_vars = {"x1", "x2"};
  log.events.push_back({0.0, {1.0, 0.5}, 0.25, 3, -0.5, 0.3});
  std::ostringstream os;
  write_events_csv(os, log, "abc");
  CHECK(os.str() == "# config_hash=abc\nt,x1,x2,tau,region,max_phi,oracle_tau\n0,1,0.5,0.25,3,-0.5,0.29999999999999999\n");
}
