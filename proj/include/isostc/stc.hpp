#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isostc/bound.hpp"
#include "isostc/dynamics.hpp"
#include "isostc/synth.hpp"

namespace isostc {

// ---------------------------------------------------------------------------
// integration

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

struct IntegratorOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h_min = 1e-14;
  std::int64_t max_steps = 50'000'000;
};

/// One accepted Dormand-Prince step with its quartic continuous extension.
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  std::vector<double> rcont;  // 5 * dim coefficients

  /// State at t in [t0, t0 + h].
  void eval(double t, std::span<double> out) const;
};

/// Piecewise dense output over [t_begin, t_end].
class Trajectory {
 public:
  explicit Trajectory(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  double t_begin() const { return steps_.empty() ? 0.0 : steps_.front().t0; }
  double t_end() const { return steps_.empty() ? 0.0 : steps_.back().t0 + steps_.back().h; }
  const std::vector<DenseStep>& steps() const { return steps_; }
  void append(DenseStep step) { steps_.push_back(std::move(step)); }

  std::vector<double> at(double t) const;

 private:
  std::size_t dim_;
  std::vector<DenseStep> steps_;
};

/// Adaptive Dormand-Prince 5(4) stepper.
class Dopri5 {
 public:
  Dopri5(Rhs rhs, std::size_t dim, IntegratorOptions options = {});

  void reset(double t, std::span<const double> y);
  /// Advances by one accepted step, never past t_limit. Throws
  /// IntegrationError on step-size underflow.
  const DenseStep& step(double t_limit);

  double t() const { return t_; }
  const std::vector<double>& y() const { return y_; }

 private:
  double initial_step(double t_limit);

  Rhs rhs_;
  std::size_t n_;
  IntegratorOptions opt_;
  double t_ = 0.0;
  double h_ = 0.0;
  std::vector<double> y_;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_;
  bool fsal_ready_ = false;
  DenseStep last_;
  std::int64_t steps_ = 0;
};

Trajectory integrate(const Rhs& rhs, std::span<const double> y0, double t0, double horizon,
                     const IntegratorOptions& options = {});

/// Right-hand side of the extended field F over problem.coordinates().
Rhs extended_rhs(const EtcProblem& problem);

// ---------------------------------------------------------------------------
// triggering-time oracle

struct Crossing {
  double t = 0.0;
  bool upward = true;
};

struct OracleResult {
  std::optional<double> tau;  // first crossing
  std::vector<Crossing> crossings;
  std::vector<double> state_at_tau;  // extended state at tau (when found)
  double max_phi = -INFINITY;         // over the checked nodes before tau
};

struct OracleOptions {
  IntegratorOptions integrator;
  int nodes_per_step = 8;
  double root_tol = 1e-10;
  bool all_crossings = false;  // keep integrating to the horizon
};

/// Integrates (x, 0) under F and detects sign changes of phi on the dense
/// output at interior nodes of every step; each root is refined by bisection.
OracleResult tau_oracle(const EtcProblem& problem, std::span<const double> x, double horizon,
                        const OracleOptions& options = {});

// ---------------------------------------------------------------------------
// grids and regions

struct TimeGrid {
  std::vector<double> times;  // tau_1 < .. < tau_q
  double ratio = 0.0;
  int q = 0;

  double tau(int i) const { return times[static_cast<std::size_t>(i - 1)]; }  // 1-based
};

TimeGrid make_grid(double tau_max, double ratio, int q);

class OutsideOuterRegion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest 1-based i with mu(x, tau_i) <= 0.
int region_index(const MuBound& bound, const TimeGrid& grid, std::span<const double> x);
int region_index_linear(const MuBound& bound, const TimeGrid& grid, std::span<const double> x);

struct CoverageOutcome {
  enum class Status : std::uint8_t { certified, counterexample, budget_exhausted };
  Status status = Status::certified;
  std::vector<double> witness;
  std::int64_t boxes = 0;
};

/// Certifies mu(x, tau_1) <= 0 on the operating box B (origin excluded).
CoverageOutcome check_coverage(const MuBound& bound, const TimeGrid& grid,
                               const std::vector<Interval>& B, std::int64_t max_boxes = 200'000,
                               double min_width = 1e-6);

struct ManifoldCloud {
  double tau_star = 0.0;
  std::vector<int> direction;  // index of each emitted point
  std::vector<std::vector<double>> points;
  std::vector<double> rho;
  int skipped = 0;
};

/// Unit directions: uniform angles for two coordinates, otherwise
/// normalised Gaussian draws from `seed`.
std::vector<std::vector<double>> unit_directions(std::size_t dim, int count, std::uint64_t seed);

ManifoldCloud manifold_points(const MuBound& bound, double tau_star, int directions, std::uint64_t seed);

// ---------------------------------------------------------------------------
// simulation

struct Event {
  double t = 0.0;
  std::vector<double> x;
  double tau = 0.0;
  int region = -1;  // -1: ETC crossing, 0: fallback, 1..q: region
  double max_phi = 0.0;
  double oracle_tau = -1.0;  // filled when soundness checks are requested
};

struct EventLog {
  std::vector<std::string> state_vars;
  std::vector<Event> events;
  double horizon = 0.0;
  bool exhausted = false;  // ETC: no crossing before the horizon ended the run
};

EventLog simulate_etc(const EtcProblem& problem, std::span<const double> x0, double horizon,
                      const OracleOptions& options = {});

struct StcOptions {
  std::optional<double> tau_fallback;
  bool check_soundness = false;
  int max_phi_nodes = 64;
  OracleOptions oracle;
};

EventLog simulate_stc(const EtcProblem& problem, const MuBound& bound, const TimeGrid& grid,
                      std::span<const double> x0, double horizon, const StcOptions& options = {});

/// t, x..., tau, region, max_phi, oracle_tau (-1 when unchecked)
void write_events_csv(std::ostream& out, const EventLog& log, const std::string& config_hash);
/// direction, coordinates..., rho, tau_star
void write_manifold_csv(std::ostream& out, const ManifoldCloud& cloud, const std::vector<std::string>& state_vars,
                        const std::string& config_hash);

}  // namespace isostc
