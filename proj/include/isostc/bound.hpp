#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <vector>

#include "isostc/dynamics.hpp"
#include "isostc/synth.hpp"

namespace isostc {

class BoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// x = 0, where the bound is undefined.
class UndefinedInput : public BoundError {
 public:
  using BoundError::BoundError;
};

/// mu(x_D, 0) >= 0: the deltas violate the margin condition at this direction.
class InvalidBound : public BoundError {
 public:
  using BoundError::BoundError;
};

/// No sign change of mu(x_D, .) below t_max.
class HorizonError : public BoundError {
 public:
  using BoundError::BoundError;
};

struct ComparisonMatrix {
  Eigen::MatrixXd A;  // (p+1) x (p+1)
  int p = 0;
};

/// Superdiagonal ones, row p-1 = [delta_0 .. delta_{p-1}, 1], last row zero.
ComparisonMatrix build_matrix(const std::vector<double>& deltas);

/// exp(A s) by scaling and squaring; entries in [-1e-12, 0) are set to 0.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A, double s);

struct TauDown {
  double value = 0.0;
  double t_lo = 0.0;  // bracket on the sphere, before transport
  double t_hi = 0.0;
  double residual = 0.0;
};

/// mu(x, t) = lambda^(theta+1) C exp(A lambda^alpha t) v(x_D), with
/// lambda = |x| / r and x_D = r x / |x|.
class MuBound {
 public:
  MuBound(const EtcProblem& problem, const LieChain& chain, const DeltaVector& delta);

  double mu(std::span<const double> x, double t) const;

  /// lambda and the clamped sphere vector of x, reusable across times.
  struct Ray {
    double lambda = 0.0;
    Eigen::VectorXd v;
  };
  Ray ray(std::span<const double> x) const;
  double mu(const Ray& ray, double t) const;
  TauDown tau_down(std::span<const double> x) const;

  /// Clamped initial vector [phi, max(L phi, 0), .., max(L^(p-1) phi, 0), delta_p]
  /// at the extended point (x, 0); x is not projected.
  Eigen::VectorXd clamped_vector(std::span<const double> x) const;
  /// Unclamped [phi, L phi, .., L^(p-1) phi, delta_p] at an extended point.
  Eigen::VectorXd lie_vector(std::span<const double> xi) const;

  /// Enclosures of L^i phi, i < p, over (box, 0).
  std::vector<Interval> lie_enclosure(std::span<const Interval> box) const;

  /// Root of s -> C exp(A s) v(u) for u on the sphere of radius r.
  TauDown sphere_root(std::span<const double> u) const;

  const ComparisonMatrix& matrix() const { return A_; }
  double r() const { return r_; }
  int alpha() const { return alpha_; }
  int theta() const { return theta_; }
  double delta_p() const { return delta_p_; }
  std::size_t dim() const { return n_; }

 private:
  ComparisonMatrix A_;
  double delta_p_;
  double r_;
  int alpha_;
  int theta_;
  std::size_t n_;
  std::vector<CompiledExpr> lie_;  // L^0 .. L^(p-1) over (x, e)
};

/// Comparison-system bound from an extended initial point, unclamped.
double psi1(const MuBound& bound, std::span<const double> xi0, double t);
/// Clamped bound from (x, 0), without projection onto the sphere.
double eta1(const MuBound& bound, std::span<const double> x, double t);

}  // namespace isostc
