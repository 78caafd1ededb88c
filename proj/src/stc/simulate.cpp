#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "isostc/stc.hpp"

namespace isostc {

OracleResult tau_oracle(const EtcProblem& problem, std::span<const double> x, double horizon,
                        const OracleOptions& options) {
  const std::size_t N = problem.state_dim();
  if (x.size() != N) throw std::invalid_argument("initial state has the wrong dimension");
  const auto coords = problem.coordinates();
  const CompiledExpr phi(problem.phi, coords);
  Dopri5 stepper(extended_rhs(problem), 2 * N, options.integrator);
  std::vector<double> y(2 * N, 0.0);
  std::copy(x.begin(), x.end(), y.begin());
  stepper.reset(0.0, y);

  OracleResult out;
  double t_prev = 0.0;
  double phi_prev = phi.eval(y);
  if (phi_prev > 0.0) {
    out.tau = 0.0;
    out.crossings.push_back({0.0, true});
    out.state_at_tau = y;
    out.max_phi = phi_prev;
    return out;
  }
  out.max_phi = phi_prev;
  const int nodes = std::max(options.nodes_per_step, 0) + 1;
  std::vector<double> ys(2 * N);
  while (stepper.t() < horizon) {
    const DenseStep& s = stepper.step(horizon);
    for (int k = 1; k <= nodes; ++k) {
      const double tk = k == nodes ? s.t0 + s.h : s.t0 + s.h * k / nodes;
      s.eval(tk, ys);
      const double ph = phi.eval(ys);
      const bool up = phi_prev <= 0.0 && ph > 0.0;
      const bool down = phi_prev > 0.0 && ph <= 0.0;
      if (up || down) {
        // Keep lo on the side of phi_prev.
        double lo = t_prev;
        double hi = tk;
        while (hi - lo > options.root_tol) {
          const double m = 0.5 * (lo + hi);
          s.eval(m, ys);
          const double pm = phi.eval(ys);
          if ((pm > 0.0) == (phi_prev > 0.0)) {
            lo = m;
          } else {
            hi = m;
          }
        }
        out.crossings.push_back({lo, up});
        if (!out.tau) {
          out.tau = lo;
          out.state_at_tau.resize(2 * N);
          s.eval(lo, out.state_at_tau);
          s.eval(lo, ys);
          out.max_phi = std::max(out.max_phi, phi.eval(ys));
          if (!options.all_crossings) return out;
        }
      }
      if (!out.tau) out.max_phi = std::max(out.max_phi, ph);
      phi_prev = ph;
      t_prev = tk;
    }
  }
  return out;
}

EventLog simulate_etc(const EtcProblem& problem, std::span<const double> x0, double horizon,
                      const OracleOptions& options) {
  EventLog log;
  log.state_vars = problem.state_vars;
  log.horizon = horizon;
  OracleOptions first_only = options;
  first_only.all_crossings = false;
  std::vector<double> x(x0.begin(), x0.end());
  double t = 0.0;
  const std::size_t N = problem.state_dim();
  while (t < horizon) {
    OracleResult r = tau_oracle(problem, x, horizon - t, first_only);
    Event ev;
    ev.t = t;
    ev.x = x;
    ev.region = -1;
    ev.max_phi = r.max_phi;
    if (!r.tau) {
      ev.tau = -1.0;
      log.events.push_back(std::move(ev));
      log.exhausted = true;
      break;
    }
    if (*r.tau <= 0.0) throw IntegrationError("triggering function is nonnegative at a sample");
    ev.tau = *r.tau;
    ev.oracle_tau = *r.tau;
    log.events.push_back(std::move(ev));
    t += *r.tau;
    std::copy(r.state_at_tau.begin(), r.state_at_tau.begin() + static_cast<std::ptrdiff_t>(N), x.begin());
  }
  return log;
}

EventLog simulate_stc(const EtcProblem& problem, const MuBound& bound, const TimeGrid& grid,
                      std::span<const double> x0, double horizon, const StcOptions& options) {
  EventLog log;
  log.state_vars = problem.state_vars;
  log.horizon = horizon;
  const std::size_t N = problem.state_dim();
  const auto coords = problem.coordinates();
  const CompiledExpr phi(problem.phi, coords);
  const Rhs rhs = extended_rhs(problem);
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> y(2 * N);
  std::vector<double> ys(2 * N);
  double t = 0.0;
  while (t < horizon) {
    Event ev;
    ev.t = t;
    ev.x = x;
    try {
      ev.region = region_index(bound, grid, x);
      ev.tau = grid.tau(ev.region);
    } catch (const OutsideOuterRegion&) {
      if (!options.tau_fallback) throw;
      ev.region = 0;
      ev.tau = *options.tau_fallback;
    } catch (const BoundError&) {
      if (!options.tau_fallback) throw;
      ev.region = 0;
      ev.tau = *options.tau_fallback;
    }

    std::fill(y.begin(), y.end(), 0.0);
    std::copy(x.begin(), x.end(), y.begin());
    const Trajectory traj = integrate(rhs, y, 0.0, ev.tau, options.oracle.integrator);
    double max_phi = phi.eval(y);
    for (const auto& s : traj.steps()) {
      s.eval(s.t0 + s.h, ys);
      max_phi = std::max(max_phi, phi.eval(ys));
    }
    const int nodes = std::max(options.max_phi_nodes, 1);
    for (int k = 1; k <= nodes; ++k) {
      const auto yk = traj.at(ev.tau * k / nodes);
      max_phi = std::max(max_phi, phi.eval(yk));
    }
    ev.max_phi = max_phi;

    if (options.check_soundness) {
      OracleOptions o = options.oracle;
      o.all_crossings = false;
      const double window = std::max(4.0 * ev.tau, 1e-3);
      const OracleResult r = tau_oracle(problem, x, window, o);
      ev.oracle_tau = r.tau ? *r.tau : -1.0;
    }
    const auto end = traj.at(ev.tau);
    std::copy(end.begin(), end.begin() + static_cast<std::ptrdiff_t>(N), x.begin());
    t += ev.tau;
    log.events.push_back(std::move(ev));
  }
  return log;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_events_csv(std::ostream& out, const EventLog& log, const std::string& config_hash) {
  out << "# config_hash=" << config_hash << "\n";
  out << "t";
  for (const auto& v : log.state_vars) out << "," << v;
  out << ",tau,region,max_phi,oracle_tau\n";
  for (const auto& e : log.events) {
    out << num(e.t);
    for (double v : e.x) out << "," << num(v);
    out << "," << num(e.tau) << "," << e.region << "," << num(e.max_phi) << "," << num(e.oracle_tau) << "\n";
  }
}

void write_manifold_csv(std::ostream& out, const ManifoldCloud& cloud, const std::vector<std::string>& state_vars,
                        const std::string& config_hash) {
  out << "# config_hash=" << config_hash << "\n";
  out << "direction";
  for (const auto& v : state_vars) out << "," << v;
  out << ",rho,tau_star\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    out << cloud.direction[i];
    for (double v : cloud.points[i]) out << "," << num(v);
    out << "," << num(cloud.rho[i]) << "," << num(cloud.tau_star) << "\n";
  }
}

}  // namespace isostc
