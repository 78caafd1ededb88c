#include <algorithm>
#include <cmath>

#include "isostc/stc.hpp"

namespace isostc {

namespace {

constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace

void DenseStep::eval(double t, std::span<double> out) const {
  const std::size_t n = out.size();
  const double s = h == 0.0 ? 0.0 : (t - t0) / h;
  const double s1 = 1.0 - s;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = rcont[i] +
             s * (rcont[n + i] + s1 * (rcont[2 * n + i] + s * (rcont[3 * n + i] + s1 * rcont[4 * n + i])));
  }
}

std::vector<double> Trajectory::at(double t) const {
  if (steps_.empty()) throw IntegrationError("empty trajectory");
  auto it = std::upper_bound(steps_.begin(), steps_.end(), t, [](double v, const DenseStep& s) { return v < s.t0; });
  const DenseStep& s = it == steps_.begin() ? steps_.front() : *std::prev(it);
  std::vector<double> out(dim_);
  s.eval(std::clamp(t, s.t0, s.t0 + s.h), out);
  return out;
}

Dopri5::Dopri5(Rhs rhs, std::size_t dim, IntegratorOptions options)
    : rhs_(std::move(rhs)),
      n_(dim),
      opt_(options),
      y_(dim),
      k1_(dim),
      k2_(dim),
      k3_(dim),
      k4_(dim),
      k5_(dim),
      k6_(dim),
      k7_(dim),
      ytmp_(dim),
      ynew_(dim) {
  last_.rcont.resize(5 * dim);
}

void Dopri5::reset(double t, std::span<const double> y) {
  t_ = t;
  std::copy(y.begin(), y.end(), y_.begin());
  fsal_ready_ = false;
  h_ = 0.0;
  steps_ = 0;
}

double Dopri5::initial_step(double t_limit) {
  // Hairer & Wanner's starting-step heuristic for order 5.
  double d0 = 0.0;
  double d1n = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double sk = opt_.atol + opt_.rtol * std::fabs(y_[i]);
    d0 += (y_[i] / sk) * (y_[i] / sk);
    d1n += (k1_[i] / sk) * (k1_[i] / sk);
  }
  d0 = std::sqrt(d0 / static_cast<double>(n_));
  d1n = std::sqrt(d1n / static_cast<double>(n_));
  double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
  h0 = std::min(h0, t_limit - t_);
  for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y_[i] + h0 * k1_[i];
  rhs_(t_ + h0, ytmp_, k2_);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double sk = opt_.atol + opt_.rtol * std::fabs(y_[i]);
    const double v = (k2_[i] - k1_[i]) / sk;
    d2 += v * v;
  }
  d2 = std::sqrt(d2 / static_cast<double>(n_)) / h0;
  const double big = std::max(d1n, d2);
  const double h1 = big <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / big, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, t_limit - t_});
}

const DenseStep& Dopri5::step(double t_limit) {
  if (!(t_limit > t_)) throw IntegrationError("step limit must lie ahead of the current time");
  if (!fsal_ready_) {
    rhs_(t_, y_, k1_);
    fsal_ready_ = true;
  }
  if (h_ <= 0.0) h_ = initial_step(t_limit);
  bool last_rejected = false;
  for (;;) {
    if (++steps_ > opt_.max_steps) throw IntegrationError("step budget exhausted");
    double h = std::min(h_, t_limit - t_);
    const bool clipped = h < h_;
    if (h < opt_.h_min * std::max(1.0, std::fabs(t_))) {
      if (t_limit - t_ <= opt_.h_min * std::max(1.0, std::fabs(t_))) {
        h = t_limit - t_;
      } else {
        throw IntegrationError("step size underflow");
      }
    }
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y_[i] + h * a21 * k1_[i];
    rhs_(t_ + c2 * h, ytmp_, k2_);
    for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    rhs_(t_ + c3 * h, ytmp_, k3_);
    for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    rhs_(t_ + c4 * h, ytmp_, k4_);
    for (std::size_t i = 0; i < n; ++i) {
      ytmp_[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    }
    rhs_(t_ + c5 * h, ytmp_, k5_);
    for (std::size_t i = 0; i < n; ++i) {
      ytmp_[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]);
    }
    rhs_(t_ + h, ytmp_, k6_);
    for (std::size_t i = 0; i < n; ++i) {
      ynew_[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
    }
    rhs_(t_ + h, ynew_, k7_);

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sk = opt_.atol + opt_.rtol * std::max(std::fabs(y_[i]), std::fabs(ynew_[i]));
      const double ei = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);
      err += (ei / sk) * (ei / sk);
    }
    err = std::sqrt(err / static_cast<double>(n));
    if (!std::isfinite(err)) {
      h_ = 0.25 * h;
      last_rejected = true;
      continue;
    }
    double fac = err == 0.0 ? 10.0 : 0.9 * std::pow(err, -0.2);
    fac = std::clamp(fac, 0.2, 10.0);
    if (err <= 1.0) {
      last_.t0 = t_;
      last_.h = h;
      for (std::size_t i = 0; i < n; ++i) {
        const double ydiff = ynew_[i] - y_[i];
        const double bspl = h * k1_[i] - ydiff;
        last_.rcont[i] = y_[i];
        last_.rcont[n + i] = ydiff;
        last_.rcont[2 * n + i] = bspl;
        last_.rcont[3 * n + i] = ydiff - h * k7_[i] - bspl;
        last_.rcont[4 * n + i] =
            h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] + d6 * k6_[i] + d7 * k7_[i]);
      }
      t_ = t_ + h;
      if (t_limit - t_ <= 1e-15 * std::max(1.0, std::fabs(t_limit))) t_ = t_limit;
      std::swap(y_, ynew_);
      std::swap(k1_, k7_);
      if (last_rejected) fac = std::min(fac, 1.0);
      if (!clipped) h_ = h * fac;
      return last_;
    }
    h_ = h * std::min(fac, 1.0);
    last_rejected = true;
  }
}

Trajectory integrate(const Rhs& rhs, std::span<const double> y0, double t0, double horizon,
                     const IntegratorOptions& options) {
  Dopri5 stepper(rhs, y0.size(), options);
  stepper.reset(t0, y0);
  Trajectory traj(y0.size());
  const double t_end = t0 + horizon;
  while (stepper.t() < t_end) traj.append(stepper.step(t_end));
  return traj;
}

Rhs extended_rhs(const EtcProblem& problem) {
  const auto coords = problem.coordinates();
  auto compiled = std::make_shared<std::vector<CompiledExpr>>();
  for (const auto& f : problem.field) compiled->emplace_back(f, coords);
  return [compiled](double, std::span<const double> y, std::span<double> dy) {
    for (std::size_t i = 0; i < compiled->size(); ++i) dy[i] = (*compiled)[i].eval(y);
  };
}

}  // namespace isostc
