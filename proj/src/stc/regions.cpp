#include <cmath>
#include <numbers>
#include <random>

#include "isostc/stc.hpp"

namespace isostc {

TimeGrid make_grid(double tau_max, double ratio, int q) {
  if (!(tau_max > 0.0)) throw std::invalid_argument("tau_max must be positive");
  if (!(ratio > 1.0)) throw std::invalid_argument("grid ratio must exceed 1");
  if (q < 2) throw std::invalid_argument("grid needs q > 1");
  TimeGrid g;
  g.ratio = ratio;
  g.q = q;
  g.times.resize(static_cast<std::size_t>(q));
  g.times.back() = tau_max;
  for (int i = q - 2; i >= 0; --i) {
    g.times[static_cast<std::size_t>(i)] = g.times[static_cast<std::size_t>(i) + 1] / ratio;
  }
  return g;
}

int region_index(const MuBound& bound, const TimeGrid& grid, std::span<const double> x) {
  const MuBound::Ray ray = bound.ray(x);
  if (bound.mu(ray, grid.tau(1)) > 0.0) throw OutsideOuterRegion("mu(x, tau_1) > 0");
  int lo = 1;  // mu(x, tau_lo) <= 0
  int hi = grid.q + 1;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (bound.mu(ray, grid.tau(mid)) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

int region_index_linear(const MuBound& bound, const TimeGrid& grid, std::span<const double> x) {
  const MuBound::Ray ray = bound.ray(x);
  int best = 0;
  for (int i = 1; i <= grid.q; ++i) {
    if (bound.mu(ray, grid.tau(i)) <= 0.0) best = i;
  }
  if (best == 0) throw OutsideOuterRegion("mu(x, tau_1) > 0");
  return best;
}

CoverageOutcome check_coverage(const MuBound& bound, const TimeGrid& grid,
                               const std::vector<Interval>& B, std::int64_t max_boxes, double min_width) {
  CoverageOutcome out;
  const double tau1 = grid.tau(1);
  const double r = bound.r();
  const int p = bound.matrix().p;

  auto point_bad = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    if (s == 0.0) return false;
    return bound.mu(x, tau1) > 0.0;
  };

  std::vector<std::vector<Interval>> stack{B};
  while (!stack.empty()) {
    std::vector<Interval> box = std::move(stack.back());
    stack.pop_back();
    if (out.boxes >= max_boxes) {
      out.status = CoverageOutcome::Status::budget_exhausted;
      return out;
    }
    ++out.boxes;
    std::vector<double> mid(box.size());
    double widest = 0.0;
    std::size_t k = 0;
    bool has_origin = true;
    for (std::size_t i = 0; i < box.size(); ++i) {
      mid[i] = box[i].mid();
      if (box[i].width() > widest) {
        widest = box[i].width();
        k = i;
      }
      if (!box[i].contains_zero()) has_origin = false;
    }
    if (widest == 0.0) {
      if (point_bad(mid)) {
        out.status = CoverageOutcome::Status::counterexample;
        out.witness = mid;
        return out;
      }
      continue;
    }
    if (!has_origin) {
      Interval sq(0.0);
      for (const auto& iv : box) sq = sq + pow(iv, 2);
      const Interval nrm = sqrt(sq);
      std::vector<Interval> xd(box.size());
      for (std::size_t i = 0; i < box.size(); ++i) xd[i] = Interval(r) * box[i] / nrm;
      bool decided = false;
      try {
        const auto enc = bound.lie_enclosure(xd);
        Eigen::VectorXd v(p + 1);
        v(0) = enc[0].hi;
        for (int i = 1; i < p; ++i) v(i) = std::max(enc[static_cast<std::size_t>(i)].hi, 0.0);
        v(p) = bound.delta_p();
        const double s_hi = std::pow(detail::up(nrm.hi / r), bound.alpha()) * tau1 * (1.0 + 1e-12);
        decided = expm(bound.matrix().A, s_hi).row(0).dot(v) < 0.0;
      } catch (const IntervalError&) {
        decided = false;
      }
      if (decided) continue;
    }
    if (point_bad(mid)) {
      out.status = CoverageOutcome::Status::counterexample;
      out.witness = mid;
      return out;
    }
    if (widest <= min_width) continue;
    const double m = box[k].mid();
    std::vector<Interval> upper = box;
    upper[k].lo = m;
    box[k].hi = m;
    stack.push_back(std::move(upper));
    stack.push_back(std::move(box));
  }
  return out;
}

std::vector<std::vector<double>> unit_directions(std::size_t dim, int count, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * std::numbers::pi * k / count;
      out.push_back({std::cos(a), std::sin(a)});
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < count; ++k) {
    std::vector<double> u(dim);
    double s = 0.0;
    do {
      s = 0.0;
      for (auto& v : u) {
        v = normal(rng);
        s += v * v;
      }
    } while (s == 0.0);
    for (auto& v : u) v /= std::sqrt(s);
    out.push_back(std::move(u));
  }
  return out;
}

ManifoldCloud manifold_points(const MuBound& bound, double tau_star, int directions, std::uint64_t seed) {
  if (!(tau_star > 0.0)) throw std::invalid_argument("tau_star must be positive");
  ManifoldCloud cloud;
  cloud.tau_star = tau_star;
  const auto dirs = unit_directions(bound.dim(), directions, seed);
  for (int k = 0; k < directions; ++k) {
    const auto& u = dirs[static_cast<std::size_t>(k)];
    double tau_u = 0.0;
    try {
      tau_u = bound.tau_down(u).value;
    } catch (const BoundError&) {
      ++cloud.skipped;
      continue;
    }
    const double rho = std::pow(tau_u / tau_star, 1.0 / bound.alpha());
    std::vector<double> pt(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) pt[i] = rho * u[i];
    cloud.direction.push_back(k);
    cloud.points.push_back(std::move(pt));
    cloud.rho.push_back(rho);
  }
  return cloud;
}

}  // namespace isostc
