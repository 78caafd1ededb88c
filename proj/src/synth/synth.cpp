#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "isostc/synth.hpp"

namespace isostc {

std::vector<std::vector<double>> low_discrepancy(std::size_t count, std::size_t dim, std::uint64_t seed) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (dim > std::size(kPrimes)) throw SynthError("low_discrepancy supports at most 16 dimensions");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> shift(dim);
  for (auto& s : shift) s = unit(rng);
  std::vector<std::vector<double>> out(count, std::vector<double>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const int base = kPrimes[j];
      double f = 1.0;
      double r = 0.0;
      for (std::size_t k = i + 1; k > 0; k /= static_cast<std::size_t>(base)) {
        f /= base;
        r += f * static_cast<double>(k % static_cast<std::size_t>(base));
      }
      r += shift[j];
      out[i][j] = r - std::floor(r);
    }
  }
  return out;
}

std::vector<ConstraintRow> positivity_rows(int p) {
  std::vector<ConstraintRow> rows;
  for (int i = 0; i <= p; ++i) {
    ConstraintRow r{std::vector<double>(static_cast<std::size_t>(p) + 1, 0.0), 0.0};
    r.g[static_cast<std::size_t>(i)] = -1.0;
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

Env bind(const std::vector<std::string>& names, const std::vector<double>& values) {
  Env env;
  for (std::size_t i = 0; i < names.size(); ++i) env[names[i]] = values[i];
  return env;
}

ConstraintRow row1_from_values(const std::vector<double>& lie) {
  const std::size_t p = lie.size() - 1;
  ConstraintRow r{std::vector<double>(p + 1), -lie[p]};
  for (std::size_t i = 0; i < p; ++i) r.g[i] = -lie[i];
  r.g[p] = -1.0;
  return r;
}

ConstraintRow row2_from_value(double phi0, int p, double eps) {
  ConstraintRow r{std::vector<double>(static_cast<std::size_t>(p) + 1, 0.0), -eps};
  r.g[0] = -phi0;
  r.g[static_cast<std::size_t>(p)] = -1.0;
  return r;
}

}  // namespace

std::vector<ConstraintRow> assemble_rows(const EtcProblem& problem, const LieChain& chain, const SamplePoint& X) {
  const int p = chain.order();
  std::vector<ConstraintRow> rows;
  if (!X.z.empty()) {
    const Env env = bind(chain.coords, X.z);
    std::vector<double> lie;
    for (const auto& e : chain.exprs) lie.push_back(eval(e, env));
    rows.push_back(row1_from_values(lie));
  }
  if (!X.x0.empty()) {
    Env env = bind(problem.state_vars, X.x0);
    for (const auto& e : problem.error_vars) env[e] = 0.0;
    rows.push_back(row2_from_value(eval(problem.phi, env), p, problem.eps_margin));
  }
  auto pos = positivity_rows(p);
  rows.insert(rows.end(), pos.begin(), pos.end());
  return rows;
}

namespace {

// Numeric view of the two rows with compiled Lie derivatives.
class RowEvaluator {
 public:
  RowEvaluator(const EtcProblem& problem, const LieChain& chain) : problem_(problem), p_(chain.order()) {
    for (const auto& e : chain.exprs) lie_.emplace_back(e, chain.coords);
    std::map<std::string, Expr, std::less<>> zero_error;
    for (const auto& e : problem.error_vars) zero_error.emplace(e, Expr::constant(0.0));
    phi0_ = CompiledExpr(substitute(problem.phi, zero_error), problem.state_vars);
  }

  std::vector<double> lie(std::span<const double> z) const {
    std::vector<double> out;
    for (const auto& c : lie_) out.push_back(c.eval(z));
    return out;
  }
  double phi0(std::span<const double> x0) const { return phi0_.eval(x0); }

  double residual1(std::span<const double> z, const std::vector<double>& delta) const {
    const auto v = lie(z);
    double r = v[static_cast<std::size_t>(p_)] - delta.back();
    for (int i = 0; i < p_; ++i) r -= delta[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
    return r;
  }
  double residual2(std::span<const double> x0, const std::vector<double>& delta) const {
    return problem_.eps_margin - delta.front() * phi0(x0) - delta.back();
  }

  int p() const { return p_; }

 private:
  const EtcProblem& problem_;
  int p_;
  std::vector<CompiledExpr> lie_;
  CompiledExpr phi0_;
};

// Compass search that pushes a violating point towards a local maximum of
// the residual without leaving the domain.
template <class F, class Inside>
std::vector<double> climb(std::vector<double> x, double step, const F& f, const Inside& inside) {
  double best = f(x);
  const double floor_step = step * 1e-5;
  int evals = 0;
  while (step > floor_step && evals < 2000) {
    bool moved = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (double s : {step, -step}) {
        std::vector<double> y = x;
        y[i] += s;
        if (!inside(y)) continue;
        ++evals;
        const double v = f(y);
        if (v > best) {
          best = v;
          x = std::move(y);
          moved = true;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return x;
}

}  // namespace

DeltaVector fallback(const EtcProblem& problem, const LieChain& chain, const VerifyOptions& options) {
  const double sup = sup_bound(problem, chain, options);
  DeltaVector out;
  out.deltas.assign(static_cast<std::size_t>(chain.order()) + 1, 0.0);
  double pad = 1e-6 * std::fabs(sup) + 1e-300;
  for (int attempt = 0; attempt < 4; ++attempt) {
    out.deltas.back() = std::max(problem.eps_margin, sup + pad);
    VerifyOutcome v = verify(problem, chain, out.deltas, options);
    out.certificate = {v.certified(), v.boxes_processed, options.violation_tol, v.resolution_limited, "fallback"};
    if (v.certified()) break;
    pad = pad * 1000.0 + 1e-3 * std::fabs(sup);
  }
  return out;
}

DeltaVector cegis(const EtcProblem& problem, const LieChain& chain, const CegisOptions& options, CegisTrace* trace) {
  const int p = chain.order();
  const RowEvaluator rows(problem, chain);
  const auto coords = problem.coordinates();
  const std::size_t M = coords.size();
  const std::size_t N = problem.state_vars.size();
  const double d = problem.d;
  const double tol = options.verify.violation_tol;

  auto in_ball = [d](const std::vector<double>& z) {
    double s = 0.0;
    for (double v : z) s += v * v;
    return s <= d * d;
  };
  auto in_z = [&](const std::vector<double>& x) { return problem.Z.contains(x); };

  // Coordinates absent from every Lie derivative stay at zero.
  std::set<std::string, std::less<>> used;
  for (const auto& e : chain.exprs) {
    for (const auto& v : free_variables(e)) used.insert(v);
  }
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < M; ++i) {
    if (used.contains(coords[i])) active.push_back(i);
  }
  if (active.empty()) active.push_back(0);

  auto ball_points = [&](std::size_t count, std::uint64_t seed) {
    std::vector<std::vector<double>> pts;
    std::size_t batch = count * 4;
    while (pts.size() < count) {
      for (const auto& u : low_discrepancy(batch, active.size(), seed)) {
        std::vector<double> z(M, 0.0);
        for (std::size_t k = 0; k < active.size(); ++k) z[active[k]] = d * (2.0 * u[k] - 1.0);
        if (in_ball(z)) pts.push_back(std::move(z));
        if (pts.size() == count) break;
      }
      batch *= 2;
      ++seed;
    }
    return pts;
  };
  const auto zhull = problem.Z.hull();
  auto z_points = [&](std::size_t count, std::uint64_t seed) {
    std::vector<std::vector<double>> pts;
    std::size_t batch = count * 4;
    while (pts.size() < count) {
      for (const auto& u : low_discrepancy(batch, N, seed)) {
        std::vector<double> x(N);
        for (std::size_t k = 0; k < N; ++k) x[k] = zhull[k].lo + u[k] * zhull[k].width();
        if (in_z(x)) pts.push_back(std::move(x));
        if (pts.size() == count) break;
      }
      batch *= 2;
      ++seed;
    }
    return pts;
  };

  std::vector<ConstraintRow> lp_rows = positivity_rows(p);
  std::size_t samples = 0;
  auto add_z = [&](const std::vector<double>& z) {
    lp_rows.push_back(row1_from_values(rows.lie(z)));
    ++samples;
  };
  auto add_x0 = [&](const std::vector<double>& x0) {
    lp_rows.push_back(row2_from_value(rows.phi0(x0), p, problem.eps_margin));
    ++samples;
  };

  const auto init_n = static_cast<std::size_t>(std::max(options.init_samples, 1));
  for (const auto& z : ball_points(init_n, options.seed)) add_z(z);
  // Hull corners pulled onto the sphere.
  for (std::size_t mask = 0; mask < (std::size_t{1} << active.size()); ++mask) {
    std::vector<double> z(M, 0.0);
    for (std::size_t k = 0; k < active.size(); ++k) {
      z[active[k]] = (mask >> k & 1U ? d : -d) / std::sqrt(static_cast<double>(active.size()));
    }
    add_z(z);
  }
  for (const auto& x : z_points(init_n, options.seed + 101)) add_x0(x);
  for (std::size_t mask = 0; mask < (std::size_t{1} << N); ++mask) {
    std::vector<double> x(N);
    for (std::size_t k = 0; k < N; ++k) x[k] = mask >> k & 1U ? zhull[k].hi : zhull[k].lo;
    // Shrink onto Z (a no-op for boxes).
    double lo = 0.0;
    double hi = 1.0;
    auto scaled = [&](double t) {
      std::vector<double> y = x;
      for (auto& v : y) v *= t;
      return y;
    };
    if (!in_z(x)) {
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (lo + hi);
        (in_z(scaled(m)) ? lo : hi) = m;
      }
      x = scaled(lo);
    }
    add_x0(x);
  }

  const auto screen_ball = ball_points(static_cast<std::size_t>(std::max(options.screen_points, 0)), options.seed + 7);
  const auto screen_z = z_points(static_cast<std::size_t>(std::max(options.screen_points / 4, 0)), options.seed + 13);

  std::vector<std::vector<double>> screen_lie;
  for (const auto& z : screen_ball) screen_lie.push_back(rows.lie(z));
  // Slack is relative to the size of the terms of row 1 on the ball.
  auto term_scale = [&](const std::vector<double>& dl) {
    double s = problem.eps_margin;
    for (const auto& L : screen_lie) {
      double t = std::fabs(L.back());
      for (int i = 0; i < p; ++i) t += dl[static_cast<std::size_t>(i)] * std::fabs(L[static_cast<std::size_t>(i)]);
      s = std::max(s, t);
    }
    return s;
  };

  std::vector<double> cost(static_cast<std::size_t>(p) + 1, 1e-6);
  cost.back() += 1.0;
  std::vector<double> delta;
  double pad = options.pad;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    if (trace) {
      trace->iterations = iter;
      trace->samples = samples;
    }
    LpResult lp = solve_lp(lp_rows, cost);
    if (lp.status != LpResult::Status::optimal) throw SynthError("sampled LP has no optimal vertex");
    delta = lp.x;
    for (auto& v : delta) v = std::max(v, 0.0);
    // The LP vertex is tight at the samples; certify a slightly larger delta_p.
    delta.back() += pad * term_scale(delta);

    auto f1 = [&](const std::vector<double>& z) { return rows.residual1(z, delta); };
    auto f2 = [&](const std::vector<double>& x) { return rows.residual2(x, delta); };

    // Cheap falsification on the fixed screening sets. Any positive residual
    // counts here since the verifier cannot discharge it either.
    std::vector<std::pair<double, std::size_t>> bad1;
    for (std::size_t i = 0; i < screen_ball.size(); ++i) {
      const double v = f1(screen_ball[i]);
      if (v > 0.0) bad1.emplace_back(v, i);
    }
    std::vector<std::pair<double, std::size_t>> bad2;
    for (std::size_t i = 0; i < screen_z.size(); ++i) {
      const double v = f2(screen_z[i]);
      if (v > 0.0) bad2.emplace_back(v, i);
    }
    if (!bad1.empty() || !bad2.empty()) {
      std::sort(bad1.rbegin(), bad1.rend());
      std::sort(bad2.rbegin(), bad2.rend());
      for (std::size_t k = 0; k < std::min<std::size_t>(bad1.size(), 8); ++k) {
        auto z = climb(screen_ball[bad1[k].second], 0.05 * d, f1, in_ball);
        if (trace) trace->violations.push_back(f1(z));
        add_z(z);
      }
      for (std::size_t k = 0; k < std::min<std::size_t>(bad2.size(), 4); ++k) {
        auto x = climb(screen_z[bad2[k].second], 0.05 * zhull[0].width(), f2, in_z);
        if (trace) trace->violations.push_back(f2(x));
        add_x0(x);
      }
      continue;
    }

    VerifyOutcome v = verify(problem, chain, delta, options.verify);
    if (v.certified()) {
      DeltaVector out;
      out.deltas = delta;
      out.certificate = {true, v.boxes_processed, tol, v.resolution_limited, "cegis"};
      return out;
    }
    if (v.status == VerifyOutcome::Status::budget_exhausted) {
      // Too tight to discharge: retry the same LP with more slack.
      if (pad * 10.0 > options.max_pad) throw BudgetExhausted("verifier box budget exhausted", delta, v.worst_box);
      pad *= 10.0;
      continue;
    }
    if (trace) trace->violations.push_back(v.violation);
    if (v.row == 1) {
      add_z(climb(v.point.z, 0.01 * d, f1, in_ball));
    } else {
      add_x0(climb(v.point.x0, 0.01 * zhull[0].width(), f2, in_z));
    }
  }
  throw BudgetExhausted("cegis iteration limit reached", delta, {});
}

std::string to_json(const DeltaVector& delta, const EtcProblem& problem, const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["deltas"] = delta.deltas;
  j["p"] = delta.p();
  j["d"] = problem.d;
  j["eps_margin"] = problem.eps_margin;
  j["certificate"] = {{"verified", delta.certificate.verified},
                      {"boxes_processed", delta.certificate.boxes_processed},
                      {"tolerance", delta.certificate.tolerance},
                      {"resolution_limited", delta.certificate.resolution_limited},
                      {"method", delta.certificate.method}};
  j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

DeltaVector delta_from_json(const std::string& text, std::string* config_hash) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SynthError(std::string("deltas document is not valid JSON: ") + e.what());
  }
  if (!j.contains("deltas") || !j["deltas"].is_array() || j["deltas"].size() < 2) {
    throw SynthError("deltas document needs an array 'deltas' of length p + 1 >= 2");
  }
  DeltaVector out;
  for (const auto& v : j["deltas"]) {
    if (!v.is_number()) throw SynthError("'deltas' entries must be numbers");
    out.deltas.push_back(v.get<double>());
  }
  if (j.contains("p") && j["p"].get<int>() != out.p()) throw SynthError("'p' disagrees with the length of 'deltas'");
  if (j.contains("certificate")) {
    const auto& c = j["certificate"];
    out.certificate.verified = c.value("verified", false);
    out.certificate.boxes_processed = c.value("boxes_processed", std::int64_t{0});
    out.certificate.tolerance = c.value("tolerance", 1e-9);
    out.certificate.resolution_limited = c.value("resolution_limited", std::int64_t{0});
    out.certificate.method = c.value("method", std::string("external"));
  } else {
    out.certificate.method = "external";
  }
  if (config_hash) *config_hash = j.value("config_hash", std::string());
  return out;
}

}  // namespace isostc
