#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "isostc/config.hpp"
#include "isostc/stc.hpp"
#include "isostc/synth.hpp"

using namespace isostc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300}); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string vec(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

const Config& config(const std::string& name) {
  static std::map<std::string, Config> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, load_config(std::string(ISOSTC_CONFIG_DIR) + "/" + name)).first;
  return it->second;
}

const std::vector<double> kPublishedDeltas{0.0, 0.1272, 0.0, 0.0191};

// Synthesized once per configuration with the shipped seed and budget.
const DeltaVector& synthesized(const std::string& name) {
  static std::map<std::string, DeltaVector> cache;
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  const Config& cfg = config(name);
  CegisOptions co;
  co.seed = cfg.seed;
  co.init_samples = cfg.init_samples;
  co.verify.max_boxes = cfg.max_boxes;
  const LieChain chain = lie_chain(cfg.problem);
  const auto t0 = Clock::now();
  DeltaVector dv;
  try {
    dv = cegis(cfg.problem, chain, co);
  } catch (const BudgetExhausted&) {
    dv = fallback(cfg.problem, chain, co.verify);
  }
  std::cout << "  synthesized " << name << ": " << vec(dv.deltas) << " method " << dv.certificate.method
            << " verified " << dv.certificate.verified << " in " << fmt(seconds_since(t0)) << " s\n";
  return cache.emplace(name, dv).first->second;
}

MuBound bound_for(const Config& cfg, const std::vector<double>& deltas) {
  DeltaVector dv;
  dv.deltas = deltas;
  return MuBound(cfg.problem, lie_chain(cfg.problem), dv);
}

// Quasi-random points of Z away from the origin.
std::vector<std::vector<double>> points_in_z(const EtcProblem& P, std::size_t count, std::uint64_t seed) {
  const auto hull = P.Z.hull();
  double scale = 0.0;
  for (const auto& iv : hull) scale = std::max(scale, iv.width());
  std::vector<std::vector<double>> out;
  for (const auto& u : low_discrepancy(count * 8, hull.size(), seed)) {
    std::vector<double> x(hull.size());
    double s = 0.0;
    for (std::size_t k = 0; k < hull.size(); ++k) {
      x[k] = hull[k].lo + u[k] * hull[k].width();
      s += x[k] * x[k];
    }
    if (P.Z.contains(x) && std::sqrt(s) > 1e-3 * scale) out.push_back(std::move(x));
    if (out.size() == count) break;
  }
  return out;
}

OracleOptions oracle_options(const Config& cfg) {
  OracleOptions oo;
  oo.integrator = cfg.integrator;
  return oo;
}

Outcome criterion1() {
  const Config& cfg = config("example1.cfg");
  VerifyOptions vo;
  vo.max_boxes = 2'000'000;
  const auto t0 = Clock::now();
  const VerifyOutcome v = verify(cfg.problem, lie_chain(cfg.problem), kPublishedDeltas, vo);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = v.certified() && secs <= 600.0;
  std::ostringstream os;
  os << "verify " << vec(kPublishedDeltas) << ": ";
  switch (v.status) {
    case VerifyOutcome::Status::certified:
      os << "certified";
      break;
    case VerifyOutcome::Status::counterexample:
      os << "counterexample on row " << v.row << " violation " << fmt(v.violation) << " at "
         << vec(v.row == 1 ? v.point.z : v.point.x0);
      break;
    case VerifyOutcome::Status::budget_exhausted:
      os << "budget exhausted";
      break;
  }
  os << ", " << v.boxes_processed << " boxes, " << fmt(secs) << " s";
  o.detail = os.str();
  return o;
}

Outcome criterion2() {
  Outcome o{true, ""};
  struct Case {
    const char* name;
    int target;
  };
  for (const Case c : {Case{"example1.cfg", 383}, Case{"vdp.cfg", 114}}) {
    const Config& cfg = config(c.name);
    const auto t0 = Clock::now();
    const EventLog log = simulate_etc(cfg.problem, cfg.x0, cfg.horizon, oracle_options(cfg));
    const double secs = seconds_since(t0);
    const auto n = static_cast<int>(log.events.size());
    const bool ok = std::abs(n - c.target) <= 5 && secs < 60.0;
    o.pass = o.pass && ok;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + c.name + " " + std::to_string(n) + " events (target " +
                std::to_string(c.target) + " +/- 5) in " + fmt(secs) + " s";
  }
  return o;
}

Outcome criterion3() {
  const Config& cfg = config("example1.cfg");
  const MuBound bound = bound_for(cfg, kPublishedDeltas);
  StcOptions so;
  so.tau_fallback = cfg.tau_fallback;
  so.oracle = oracle_options(cfg);
  const EventLog log = simulate_stc(cfg.problem, bound, *cfg.grid, cfg.x0, cfg.horizon, so);
  const auto n = static_cast<int>(log.events.size());
  return {std::abs(n - 554) <= 10, std::to_string(n) + " events (target 554 +/- 10)"};
}

Outcome criterion4() {
  const Config& cfg = config("jet.cfg");
  OracleOptions oo = oracle_options(cfg);
  oo.all_crossings = true;
  const OracleResult r = tau_oracle(cfg.problem, cfg.x0, 5.0, oo);
  std::vector<double> t;
  for (const auto& c : r.crossings) t.push_back(c.t);
  const bool ok = t.size() >= 2 && std::fabs(t[0] - 1.15) <= 0.05 && std::fabs(t[1] - 3.22) <= 0.05;
  return {ok, "crossings at " + vec(t) + " (targets 1.15, 3.22 +/- 0.05)"};
}

Outcome criterion5() {
  Outcome o{true, ""};
  for (const std::string name : {"example1.cfg", "vdp.cfg"}) {
    const Config& cfg = config(name);
    const EtcProblem& P = cfg.problem;
    const DeltaVector& dv = synthesized(name);
    const MuBound bound = bound_for(cfg, dv.deltas);
    const CompiledExpr phi(P.phi, P.coordinates());
    const OracleOptions oo = oracle_options(cfg);
    int late = 0;
    int dominated = 0;
    int checked = 0;
    for (const auto& x : points_in_z(P, 200, cfg.seed + 500)) {
      const double td = bound.tau_down(x).value;
      // No crossing within twice the bound already means tau(x) > td.
      const double window = 2.0 * td;
      const OracleResult r = tau_oracle(P, x, window, oo);
      if (r.tau && td > *r.tau * (1.0 + 1e-9)) ++late;
      const double end = r.tau ? *r.tau : window;
      std::vector<double> y(P.coordinates().size(), 0.0);
      std::copy(x.begin(), x.end(), y.begin());
      const Trajectory traj = integrate(extended_rhs(P), y, 0.0, end, cfg.integrator);
      for (int i = 0; i <= 50; ++i) {
        const double t = end * i / 50;
        const double ph = phi.eval(traj.at(t));
        const double mu = bound.mu(x, t);
        if (mu < ph - 1e-6 * std::max(std::fabs(ph), std::fabs(mu)) - 1e-15) ++dominated;
      }
      ++checked;
    }
    StcOptions so;
    so.tau_fallback = cfg.tau_fallback;
    so.oracle = oo;
    const EventLog log = simulate_stc(P, bound, *cfg.grid, cfg.x0, cfg.horizon, so);
    double worst = -INFINITY;
    for (const auto& e : log.events) worst = std::max(worst, e.max_phi);
    const bool ok = checked == 200 && late == 0 && dominated == 0 && worst <= 1e-7;
    o.pass = o.pass && ok;
    o.detail += (o.detail.empty() ? "" : "; ") + name + ": " + std::to_string(checked) + " points, " +
                std::to_string(late) + " tau_down above oracle, " + std::to_string(dominated) +
                " mu < phi, STC max phi " + fmt(worst);
  }
  return o;
}

Outcome criterion6() {
  const Config& cfg = config("example1.cfg");
  const EtcProblem& P = cfg.problem;
  const DeltaVector& dv = synthesized("example1.cfg");
  const MuBound bound = bound_for(cfg, dv.deltas);
  const CompiledExpr phi(P.phi, P.coordinates());
  std::mt19937_64 rng(cfg.seed + 600);
  std::uniform_real_distribution<double> coord(-0.5, 0.5);
  std::uniform_real_distribution<double> lam(0.1, 10.0);
  std::uniform_real_distribution<double> time(0.0, 0.1);

  double scaling = 0.0;
  double initial = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::vector<double> x{coord(rng), coord(rng)};
    const double l = lam(rng);
    const double t = time(rng);
    const std::vector<double> lx{l * x[0], l * x[1]};
    scaling = std::max(scaling, rel(bound.mu(lx, t), std::pow(l, P.theta + 1) * bound.mu(x, std::pow(l, P.alpha) * t)));
    initial = std::max(initial, rel(bound.mu(x, 0.0), phi.eval(std::vector<double>{x[0], x[1], 0.0, 0.0})));
  }

  int mismatches = 0;
  std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
  std::uniform_real_distribution<double> logr(-3.0, 1.5);
  for (int k = 0; k < 10000; ++k) {
    const double a = angle(rng);
    const double r = std::pow(10.0, logr(rng));
    const std::vector<double> x{r * std::cos(a), r * std::sin(a)};
    int fast = 0;
    int slow = 0;
    try {
      fast = region_index(bound, *cfg.grid, x);
    } catch (const OutsideOuterRegion&) {
    }
    try {
      slow = region_index_linear(bound, *cfg.grid, x);
    } catch (const OutsideOuterRegion&) {
    }
    if (fast != slow) ++mismatches;
  }

  double min_entry = INFINITY;
  for (const std::string name : {"example1.cfg", "vdp.cfg"}) {
    const auto A = build_matrix(synthesized(name).deltas).A;
    for (int k = 0; k <= 100; ++k) min_entry = std::min(min_entry, expm(A, 0.1 * k).minCoeff());
  }

  const ManifoldCloud a = manifold_points(bound, 0.01, 256, cfg.seed);
  const ManifoldCloud b = manifold_points(bound, 0.05, 256, cfg.seed);
  int unnested = 0;
  for (std::size_t i = 0; i < a.rho.size(); ++i) {
    if (!(a.rho[i] > b.rho[i])) ++unnested;
  }

  const bool ok = scaling <= 1e-12 && initial <= 1e-12 && mismatches == 0 && min_entry >= 0.0 && unnested == 0 &&
                  a.rho.size() == 256;
  return {ok, "scaling rel " + fmt(scaling) + ", mu(x,0) rel " + fmt(initial) + ", lookup mismatches " +
                  std::to_string(mismatches) + "/10000, min expm entry " + fmt(min_entry) + ", unnested " +
                  std::to_string(unnested) + "/256"};
}

Outcome criterion7() {
  const Config& cfg = config("example1.cfg");
  const EtcProblem& P = cfg.problem;
  const OracleOptions oo = oracle_options(cfg);
  double worst = 0.0;
  int missing = 0;
  for (const auto& x : points_in_z(P, 20, cfg.seed + 700)) {
    const OracleResult base = tau_oracle(P, x, 1e3, oo);
    if (!base.tau) {
      ++missing;
      continue;
    }
    for (double l : {0.5, 2.0}) {
      const std::vector<double> lx{l * x[0], l * x[1]};
      const OracleResult r = tau_oracle(P, lx, 1e4, oo);
      if (!r.tau) {
        ++missing;
        continue;
      }
      worst = std::max(worst, rel(*r.tau, std::pow(l, -P.alpha) * *base.tau));
    }
  }
  return {missing == 0 && worst <= 1e-4, "worst relative error " + fmt(worst) + ", missing " + std::to_string(missing)};
}

Outcome criterion8() {
  const Config& cfg = config("vdp.cfg");
  const MuBound bound = bound_for(cfg, synthesized("vdp.cfg").deltas);
  StcOptions so;
  so.tau_fallback = cfg.tau_fallback;
  so.check_soundness = true;
  so.oracle = oracle_options(cfg);
  const auto t0 = Clock::now();
  const EventLog log = simulate_stc(cfg.problem, bound, *cfg.grid, cfg.x0, cfg.horizon, so);
  int unsound = 0;
  int fallbacks = 0;
  double worst = -INFINITY;
  for (const auto& e : log.events) {
    if (e.oracle_tau >= 0.0 && e.tau > e.oracle_tau) ++unsound;
    if (e.region == 0) ++fallbacks;
    worst = std::max(worst, e.max_phi);
  }
  const bool ok = unsound == 0 && worst <= 1e-7;
  return {ok, std::to_string(log.events.size()) + " events (reference 1448, not a target), " + std::to_string(unsound) +
                  " unsound, " + std::to_string(fallbacks) + " fallback, max phi " + fmt(worst) + ", " +
                  fmt(seconds_since(t0)) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> xfail;
  std::vector<int> only;
  app.add_option("--xfail", xfail, "criteria expected to fail")->delimiter(',');
  app.add_option("--only", only, "run a subset")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const std::set<int> expected(xfail.begin(), xfail.end());
  const std::set<int> selected(only.begin(), only.end());

  const std::vector<Outcome (*)()> criteria{criterion1, criterion2, criterion3, criterion4,
                                            criterion5, criterion6, criterion7, criterion8};
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool xf = expected.contains(id);
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << (xf ? " [expected failure]" : "") << "  "
              << o.detail << std::endl;
    if (o.pass == xf) {
      ++unexpected;
      if (o.pass) std::cout << "  criterion " << id << " passed but was listed as an expected failure\n";
    }
  }
  return unexpected == 0 ? 0 : 1;
}
