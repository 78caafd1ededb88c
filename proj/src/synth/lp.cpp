#include <algorithm>
#include <cmath>
#include <limits>

#include "isostc/synth.hpp"

namespace isostc {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-12;

// Tableau with the objective in the last row and the rhs in the last column.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), t_((rows + 1) * (cols + 1), 0.0), basis_(rows) {}

  double& at(std::size_t r, std::size_t c) { return t_[r * (n_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return t_[r * (n_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, n_); }
  double& obj(std::size_t c) { return at(m_, c); }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double inv = 1.0 / at(pr, pc);
    for (std::size_t c = 0; c <= n_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= m_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= n_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
    basis_[pr] = pc;
  }

  /// Objective row holds reduced costs of a minimisation. Returns false on
  /// unboundedness.
  bool run(const std::vector<bool>& allowed) {
    for (;;) {
      std::size_t enter = n_;
      for (std::size_t c = 0; c < n_; ++c) {
        if (allowed[c] && obj(c) < -kCostTol) {
          enter = c;
          break;
        }
      }
      if (enter == n_) return true;
      std::size_t leave = m_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = at(r, enter);
        if (a <= kPivotTol) continue;
        const double ratio = rhs(r) / a;
        if (ratio < best - 1e-15 || (ratio <= best + 1e-15 && leave < m_ && basis_[r] < basis_[leave])) {
          if (ratio < best) best = ratio;
          leave = r;
        }
      }
      if (leave == m_) return false;
      pivot(leave, enter);
    }
  }

 private:
  std::size_t m_;
  std::size_t n_;
  std::vector<double> t_;
  std::vector<std::size_t> basis_;
};

}  // namespace

LpResult solve_lp(const std::vector<ConstraintRow>& rows_in, const std::vector<double>& cost, double cap) {
  if (rows_in.empty()) throw SynthError("solve_lp needs at least one row");
  const std::size_t k = cost.size();
  for (const auto& r : rows_in) {
    if (r.g.size() != k) throw SynthError("row width differs from cost width");
  }

  std::vector<bool> nonneg(k, false);
  for (const auto& r : rows_in) {
    if (r.b != 0.0) continue;
    int nz = -1;
    int count = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (r.g[i] != 0.0) {
        nz = static_cast<int>(i);
        ++count;
      }
    }
    if (count == 1 && r.g[static_cast<std::size_t>(nz)] < 0.0) nonneg[static_cast<std::size_t>(nz)] = true;
  }

  // Column equilibration on the original variables.
  std::vector<double> colscale(k, 0.0);
  for (const auto& r : rows_in) {
    for (std::size_t i = 0; i < k; ++i) colscale[i] = std::max(colscale[i], std::fabs(r.g[i]));
  }
  for (auto& s : colscale) s = s > 0.0 ? 1.0 / s : 1.0;

  // Rows in scaled variables y_i = delta_i / colscale_i, plus caps.
  std::vector<ConstraintRow> rows;
  for (const auto& r : rows_in) {
    ConstraintRow s{std::vector<double>(k), r.b};
    for (std::size_t i = 0; i < k; ++i) s.g[i] = r.g[i] * colscale[i];
    rows.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < k; ++i) {
    ConstraintRow up{std::vector<double>(k, 0.0), cap};
    up.g[i] = colscale[i];
    rows.push_back(up);
    if (!nonneg[i]) {
      ConstraintRow lo{std::vector<double>(k, 0.0), cap};
      lo.g[i] = -colscale[i];
      rows.push_back(lo);
    }
  }
  std::vector<ConstraintRow> kept;
  for (auto& r : rows) {
    double s = std::fabs(r.b);
    for (double v : r.g) s = std::max(s, std::fabs(v));
    if (s == 0.0) continue;
    bool all_zero = std::all_of(r.g.begin(), r.g.end(), [](double v) { return v == 0.0; });
    if (all_zero) {
      if (r.b < 0.0) return {LpResult::Status::infeasible, {}, 0.0};
      continue;
    }
    for (double& v : r.g) v /= s;
    r.b /= s;
    kept.push_back(std::move(r));
  }

  // Columns: structural (one per nonneg variable, two per free variable),
  // then one slack per row, then artificials.
  std::vector<std::size_t> plus(k);
  std::vector<std::size_t> minus(k, SIZE_MAX);
  std::size_t ncols = 0;
  for (std::size_t i = 0; i < k; ++i) {
    plus[i] = ncols++;
    if (!nonneg[i]) minus[i] = ncols++;
  }
  const std::size_t nstruct = ncols;
  const std::size_t m = kept.size();
  const std::size_t slack0 = ncols;
  ncols += m;
  std::vector<std::size_t> art_rows;
  for (std::size_t r = 0; r < m; ++r) {
    if (kept[r].b < 0.0) art_rows.push_back(r);
  }
  const std::size_t art0 = ncols;
  ncols += art_rows.size();

  Tableau T(m, ncols);
  std::size_t a = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const double sign = kept[r].b < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      T.at(r, plus[i]) = sign * kept[r].g[i];
      if (minus[i] != SIZE_MAX) T.at(r, minus[i]) = -sign * kept[r].g[i];
    }
    T.at(r, slack0 + r) = sign;
    T.rhs(r) = sign * kept[r].b;
    if (sign < 0.0) {
      T.at(r, art0 + a) = 1.0;
      T.basis()[r] = art0 + a;
      ++a;
    } else {
      T.basis()[r] = slack0 + r;
    }
  }

  std::vector<bool> allowed(ncols, true);
  if (!art_rows.empty()) {
    // Phase 1: minimise the sum of artificials.
    for (std::size_t c = art0; c < ncols; ++c) T.obj(c) = 1.0;
    for (std::size_t r : art_rows) {
      for (std::size_t c = 0; c <= ncols; ++c) T.at(m, c) -= T.at(r, c);
    }
    T.run(allowed);
    if (-T.at(m, ncols) > 1e-9) return {LpResult::Status::infeasible, {}, 0.0};
    for (std::size_t r = 0; r < m; ++r) {
      if (T.basis()[r] < art0) continue;
      for (std::size_t c = 0; c < art0; ++c) {
        if (std::fabs(T.at(r, c)) > kPivotTol) {
          T.pivot(r, c);
          break;
        }
      }
    }
    for (std::size_t c = art0; c < ncols; ++c) allowed[c] = false;
  }

  // Phase 2 objective in reduced form.
  for (std::size_t c = 0; c <= ncols; ++c) T.obj(c) = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    T.obj(plus[i]) = cost[i] * colscale[i];
    if (minus[i] != SIZE_MAX) T.obj(minus[i]) = -cost[i] * colscale[i];
  }
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t b = T.basis()[r];
    const double cb = T.obj(b);
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c <= ncols; ++c) T.at(m, c) -= cb * T.at(r, c);
  }
  if (!T.run(allowed)) return {LpResult::Status::unbounded, {}, 0.0};

  std::vector<double> col(nstruct, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    if (T.basis()[r] < nstruct) col[T.basis()[r]] = T.rhs(r);
  }
  LpResult out;
  out.status = LpResult::Status::optimal;
  out.x.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double y = col[plus[i]];
    if (minus[i] != SIZE_MAX) y -= col[minus[i]];
    out.x[i] = y * colscale[i];
    if (nonneg[i] && out.x[i] < 0.0) out.x[i] = 0.0;
    out.objective += cost[i] * out.x[i];
  }
  return out;
}

}  // namespace isostc
