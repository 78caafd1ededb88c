#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace isostc {

/// Raised when an enclosure cannot be formed (division by an interval
/// containing zero, square root of a wholly negative interval).
class IntervalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed real interval [lo, hi] with outward-rounded arithmetic.
///
/// Every operation widens its result by one ulp on each side, so the
/// enclosures stay sound under IEEE round-to-nearest.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  constexpr Interval() = default;
  constexpr Interval(double v) : lo(v), hi(v) {}  // NOLINT(google-explicit-constructor)
  constexpr Interval(double l, double h) : lo(l), hi(h) {}

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  double mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool contains_zero() const { return lo <= 0.0 && 0.0 <= hi; }
};

namespace detail {
inline double down(double v) { return std::nextafter(v, -std::numeric_limits<double>::infinity()); }
inline double up(double v) { return std::nextafter(v, std::numeric_limits<double>::infinity()); }
inline Interval widen(double lo, double hi) { return {down(lo), up(hi)}; }
}  // namespace detail

inline Interval operator+(const Interval& a, const Interval& b) {
  return detail::widen(a.lo + b.lo, a.hi + b.hi);
}

inline Interval operator-(const Interval& a, const Interval& b) {
  return detail::widen(a.lo - b.hi, a.hi - b.lo);
}

inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator*(const Interval& a, const Interval& b) {
  const double p1 = a.lo * b.lo;
  const double p2 = a.lo * b.hi;
  const double p3 = a.hi * b.lo;
  const double p4 = a.hi * b.hi;
  return detail::widen(std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4}));
}

inline Interval operator/(const Interval& a, const Interval& b) {
  if (b.contains_zero()) {
    throw IntervalError("quotient enclosure undefined: divisor interval contains zero");
  }
  const double q1 = a.lo / b.lo;
  const double q2 = a.lo / b.hi;
  const double q3 = a.hi / b.lo;
  const double q4 = a.hi / b.hi;
  return detail::widen(std::min({q1, q2, q3, q4}), std::max({q1, q2, q3, q4}));
}

/// Tight integer power: even exponents map onto [0, max] when the base
/// straddles zero, odd exponents are monotone.
inline Interval pow(const Interval& a, int n) {
  if (n == 0) return Interval(1.0);
  if (n < 0) return Interval(1.0) / pow(a, -n);
  const double pl = std::pow(a.lo, n);
  const double ph = std::pow(a.hi, n);
  if (n % 2 == 1) return detail::widen(pl, ph);
  if (a.lo >= 0.0) return detail::widen(pl, ph);
  if (a.hi <= 0.0) return detail::widen(ph, pl);
  return {0.0, detail::up(std::max(pl, ph))};
}

inline Interval sqrt(const Interval& a) {
  if (a.hi < 0.0) throw IntervalError("square root enclosure undefined: interval is negative");
  if (a.lo < 0.0) throw IntervalError("square root enclosure undefined: interval straddles zero");
  return {std::max(0.0, detail::down(std::sqrt(a.lo))), detail::up(std::sqrt(a.hi))};
}

inline Interval hull(const Interval& a, const Interval& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

inline Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

std::string to_string(const Interval& iv);

}  // namespace isostc
