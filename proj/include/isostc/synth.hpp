#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isostc/dynamics.hpp"

namespace isostc {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Certificate {
  bool verified = false;
  std::int64_t boxes_processed = 0;
  double tolerance = 1e-9;
  /// Boxes closed at the resolution limit without a decisive enclosure.
  std::int64_t resolution_limited = 0;
  std::string method;  // "cegis", "fallback", "external"
};

struct DeltaVector {
  std::vector<double> deltas;  // delta_0 .. delta_p
  Certificate certificate;

  int p() const { return static_cast<int>(deltas.size()) - 1; }
  double delta_p() const { return deltas.back(); }
};

/// One instantiated row g . Delta <= b.
struct ConstraintRow {
  std::vector<double> g;
  double b = 0.0;
};

/// X = (z, x0). Either half may be absent; rows are emitted only for the
/// halves present.
struct SamplePoint {
  std::vector<double> z;   // point of Omega_d, over problem.coordinates()
  std::vector<double> x0;  // point of Z, over problem.state_vars
};

/// Row 1 at z, row 2 at x0, then the p + 1 positivity rows.
std::vector<ConstraintRow> assemble_rows(const EtcProblem& problem, const LieChain& chain, const SamplePoint& X);

std::vector<ConstraintRow> positivity_rows(int p);

struct LpResult {
  enum class Status : std::uint8_t { optimal, infeasible, unbounded };
  Status status = Status::infeasible;
  std::vector<double> x;
  double objective = 0.0;
};

/// Dense two-phase simplex with Bland's rule. Every variable is bounded
/// above by `cap`; variables with a row -x_i <= 0 are nonnegative, the
/// rest are free.
LpResult solve_lp(const std::vector<ConstraintRow>& rows, const std::vector<double>& cost, double cap = 1e6);

/// Residual expressions of the two universally quantified rows, as
/// functions that must stay <= 0:
///   row 1 over Omega_d: L^p phi - sum_{i<p} delta_i L^i phi - delta_p
///   row 2 over Z:       eps - delta_0 phi((x0, 0)) - delta_p
Expr row1_residual(const LieChain& chain, const std::vector<double>& deltas);
Expr row2_residual(const EtcProblem& problem, const std::vector<double>& deltas);

struct VerifyOptions {
  double violation_tol = 1e-9;
  double min_box_width = 0.0;  // 0 selects 1e-4 * d
  std::int64_t max_boxes = 2'000'000;
  int workers = 1;
};

struct VerifyOutcome {
  enum class Status : std::uint8_t { certified, counterexample, budget_exhausted };
  Status status = Status::certified;
  int row = 0;  // 1 or 2 for counterexamples
  SamplePoint point;
  double violation = 0.0;
  std::vector<Interval> worst_box;  // budget_exhausted only
  std::int64_t boxes_processed = 0;
  std::int64_t resolution_limited = 0;

  bool certified() const { return status == Status::certified; }
};

/// Interval branch-and-bound over the closed ball |z| <= d and over Z.
/// Coordinates that do not occur in a row are projected out.
VerifyOutcome verify(const EtcProblem& problem, const LieChain& chain, const std::vector<double>& deltas,
                     const VerifyOptions& options = {});

/// Certified interval upper bound of L^p phi over the ball of radius d.
double sup_bound(const EtcProblem& problem, const LieChain& chain, const VerifyOptions& options = {});

/// delta_i = 0 for i < p, delta_p = max(eps_margin, sup L^p phi) plus a
/// relative pad, verified before return.
DeltaVector fallback(const EtcProblem& problem, const LieChain& chain, const VerifyOptions& options = {});

struct CegisOptions {
  int init_samples = 64;
  std::uint64_t seed = 1;
  int max_iterations = 400;
  /// Quasi-random points screened before each branch-and-bound call.
  int screen_points = 4096;
  /// Slack added to delta_p of every LP candidate, relative to the largest row-1 term on the ball.
  double pad = 1e-2;
  /// Largest slack tried when the verifier runs out of boxes.
  double max_pad = 0.1;
  VerifyOptions verify;
};

class BudgetExhausted : public SynthError {
 public:
  BudgetExhausted(const std::string& what, std::vector<double> last_candidate, std::vector<Interval> worst_box)
      : SynthError(what), last_candidate_(std::move(last_candidate)), worst_box_(std::move(worst_box)) {}
  const std::vector<double>& last_candidate() const { return last_candidate_; }
  const std::vector<Interval>& worst_box() const { return worst_box_; }

 private:
  std::vector<double> last_candidate_;
  std::vector<Interval> worst_box_;
};

struct CegisTrace {
  int iterations = 0;
  std::size_t samples = 0;
  std::vector<double> violations;  // per counterexample
};

DeltaVector cegis(const EtcProblem& problem, const LieChain& chain, const CegisOptions& options = {},
                  CegisTrace* trace = nullptr);

/// {deltas, p, d, eps_margin, certificate, config_hash}
std::string to_json(const DeltaVector& delta, const EtcProblem& problem, const std::string& config_hash);
DeltaVector delta_from_json(const std::string& text, std::string* config_hash = nullptr);

/// Halton points in [0,1)^dim with a Cranley-Patterson shift drawn from `seed`.
std::vector<std::vector<double>> low_discrepancy(std::size_t count, std::size_t dim, std::uint64_t seed);

}  // namespace isostc
