#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "isostc/synth.hpp"

namespace isostc {

namespace {

Expr combine(const std::vector<Expr>& terms, const std::vector<double>& weights, double constant,
             const std::vector<std::string>& vars) {
  std::optional<Polynomial> acc = Polynomial::constant(vars, constant);
  for (std::size_t i = 0; i < terms.size() && acc; ++i) {
    if (weights[i] == 0.0) continue;
    auto p = to_polynomial(terms[i], vars);
    if (!p) {
      acc.reset();
      break;
    }
    *acc = *acc + p->scaled(weights[i]);
  }
  if (acc) return from_polynomial(*acc);
  std::vector<Expr> parts{Expr::constant(constant)};
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (weights[i] != 0.0) parts.push_back(Expr::constant(weights[i]) * terms[i]);
  }
  return simplify(Expr::sum(std::move(parts)));
}

// Residual f with its gradient and Hessian, over a fixed variable list.
struct Objective {
  std::vector<std::string> vars;
  CompiledExpr f;
  std::vector<CompiledExpr> grad;
  std::vector<CompiledExpr> hess;  // upper triangle, row major

  Objective(const Expr& e, std::vector<std::string> v) : vars(std::move(v)), f(e, vars) {
    std::vector<Expr> g;
    for (const auto& name : vars) {
      g.push_back(normalize(diff(e, name), vars));
      grad.emplace_back(g.back(), vars);
    }
    for (std::size_t i = 0; i < vars.size(); ++i) {
      for (std::size_t j = i; j < vars.size(); ++j) hess.emplace_back(normalize(diff(g[i], vars[j]), vars), vars);
    }
  }

  // Natural extension intersected with the mean-value and second-order forms.
  Interval enclose(std::span<const Interval> box, std::vector<Interval>& scratch) const {
    const std::size_t n = box.size();
    Interval natural = f.eval(box, scratch);
    std::vector<double> mid(n);
    std::vector<Interval> mid_iv(n);
    std::vector<Interval> h(n);
    for (std::size_t i = 0; i < n; ++i) {
      mid[i] = box[i].mid();
      mid_iv[i] = Interval(mid[i]);
      h[i] = box[i] - mid_iv[i];
    }
    const std::span<const Interval> m(mid_iv);
    const Interval fm = f.eval(m, scratch);
    Interval mv = fm;
    Interval taylor = fm;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (box[i].width() != 0.0) {
        mv = mv + grad[i].eval(box, scratch) * h[i];
        taylor = taylor + grad[i].eval(m, scratch) * h[i];
      }
      for (std::size_t j = i; j < n; ++j, ++k) {
        if (box[i].width() == 0.0 || box[j].width() == 0.0) continue;
        const Interval hij = hess[k].eval(box, scratch);
        taylor = taylor + (i == j ? Interval(0.5) * hij * pow(h[i], 2) : hij * h[i] * h[j]);
      }
    }
    return {std::max({natural.lo, mv.lo, taylor.lo}), std::min({natural.hi, mv.hi, taylor.hi})};
  }
};

// -1: box certainly outside, 0: undecided, 1: box inside.
using Membership = std::function<int(std::span<const Interval>)>;
using PointMembership = std::function<bool(std::span<const double>)>;

struct BnbResult {
  VerifyOutcome::Status status = VerifyOutcome::Status::certified;
  std::vector<double> point;
  double violation = 0.0;
  std::vector<Interval> worst_box;
  std::int64_t boxes = 0;
  std::int64_t limited = 0;
};

std::size_t widest(std::span<const Interval> box) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < box.size(); ++i) {
    if (box[i].width() > box[k].width()) k = i;
  }
  return k;
}

BnbResult branch_and_bound(const Objective& obj, std::vector<Interval> root, const Membership& member,
                           const PointMembership& point_in, const VerifyOptions& opt, double min_width,
                           std::int64_t budget) {
  BnbResult res;
  std::vector<std::vector<Interval>> stack;
  stack.push_back(std::move(root));
  std::vector<Interval> scratch;
  std::vector<double> mid;
  while (!stack.empty()) {
    std::vector<Interval> box = std::move(stack.back());
    stack.pop_back();
    if (res.boxes >= budget) {
      res.status = VerifyOutcome::Status::budget_exhausted;
      res.worst_box = std::move(box);
      return res;
    }
    ++res.boxes;
    if (member(box) < 0) continue;
    Interval enc;
    try {
      enc = obj.enclose(box, scratch);
    } catch (const IntervalError&) {
      enc = Interval(-INFINITY, INFINITY);
    }
    if (enc.hi <= 0.0) continue;

    mid.resize(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) mid[i] = box[i].mid();
    if (point_in(mid)) {
      double v = 0.0;
      try {
        v = obj.f.eval(mid);
      } catch (const EvalError&) {
        v = 0.0;
      }
      if (v > opt.violation_tol) {
        res.status = VerifyOutcome::Status::counterexample;
        res.point = mid;
        res.violation = v;
        return res;
      }
    }
    const std::size_t k = widest(box);
    if (box[k].width() <= min_width) {
      ++res.limited;
      continue;
    }
    const double m = box[k].mid();
    std::vector<Interval> upper = box;
    upper[k].lo = m;
    box[k].hi = m;
    stack.push_back(std::move(upper));
    stack.push_back(std::move(box));
  }
  return res;
}

std::vector<std::string> relevant(const Expr& e, const std::vector<std::string>& coords) {
  auto fv = free_variables(e);
  std::vector<std::string> out;
  for (const auto& c : coords) {
    if (fv.contains(c)) out.push_back(c);
  }
  return out;
}

Membership ball_member(double d) {
  return [d](std::span<const Interval> box) {
    Interval s(0.0);
    for (const auto& iv : box) s = s + pow(iv, 2);
    if (s.lo > d * d) return -1;
    return s.hi <= d * d ? 1 : 0;
  };
}

PointMembership ball_point(double d) {
  return [d](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s <= d * d;
  };
}

double resolve_min_width(const EtcProblem& problem, const VerifyOptions& opt) {
  return opt.min_box_width > 0.0 ? opt.min_box_width : 1e-4 * problem.d;
}

}  // namespace

Expr row1_residual(const LieChain& chain, const std::vector<double>& deltas) {
  const int p = chain.order();
  if (static_cast<int>(deltas.size()) != p + 1) throw SynthError("delta vector length differs from p + 1");
  std::vector<double> w(static_cast<std::size_t>(p) + 1);
  for (int i = 0; i < p; ++i) w[static_cast<std::size_t>(i)] = -deltas[static_cast<std::size_t>(i)];
  w[static_cast<std::size_t>(p)] = 1.0;
  return combine(chain.exprs, w, -deltas.back(), chain.coords);
}

Expr row2_residual(const EtcProblem& problem, const std::vector<double>& deltas) {
  std::map<std::string, Expr, std::less<>> zero_error;
  for (const auto& e : problem.error_vars) zero_error.emplace(e, Expr::constant(0.0));
  const Expr phi0 = substitute(problem.phi, zero_error);
  return combine({phi0}, {-deltas.front()}, problem.eps_margin - deltas.back(), problem.state_vars);
}

VerifyOutcome verify(const EtcProblem& problem, const LieChain& chain, const std::vector<double>& deltas,
                     const VerifyOptions& options) {
  for (double v : deltas) {
    if (v < 0.0) throw SynthError("verify requires nonnegative deltas");
  }
  VerifyOutcome out;
  const double min_w = resolve_min_width(problem, options);
  const auto coords = problem.coordinates();

  // Row 1 over the closed ball, projected on the coordinates it involves.
  const Expr r1 = row1_residual(chain, deltas);
  const auto vars1 = relevant(r1, coords);
  if (vars1.empty()) {
    const double v = eval(r1, {});
    ++out.boxes_processed;
    if (v > options.violation_tol) {
      out.status = VerifyOutcome::Status::counterexample;
      out.row = 1;
      out.point.z.assign(coords.size(), 0.0);
      out.violation = v;
      return out;
    }
  } else {
    Objective obj(r1, vars1);
    std::vector<Interval> root(vars1.size(), Interval(-problem.d, problem.d));
    BnbResult res = branch_and_bound(obj, root, ball_member(problem.d), ball_point(problem.d), options, min_w,
                                     options.max_boxes);
    out.boxes_processed += res.boxes;
    out.resolution_limited += res.limited;
    if (res.status != VerifyOutcome::Status::certified) {
      out.status = res.status;
      out.row = 1;
      out.violation = res.violation;
      if (res.status == VerifyOutcome::Status::counterexample) {
        out.point.z.assign(coords.size(), 0.0);
        for (std::size_t i = 0; i < vars1.size(); ++i) {
          auto it = std::find(coords.begin(), coords.end(), vars1[i]);
          out.point.z[static_cast<std::size_t>(it - coords.begin())] = res.point[i];
        }
      } else {
        out.worst_box = res.worst_box;
      }
      return out;
    }
  }

  // Row 2 over Z.
  const Expr r2 = row2_residual(problem, deltas);
  Objective obj2(r2, problem.state_vars);
  const DomainSpec& Z = problem.Z;
  Membership zmember = [&Z](std::span<const Interval> box) {
    if (Z.excludes(box)) return -1;
    return Z.includes(box) ? 1 : 0;
  };
  PointMembership zpoint = [&Z](std::span<const double> x) { return Z.contains(x); };
  BnbResult res2 = branch_and_bound(obj2, Z.hull(), zmember, zpoint, options, min_w,
                                    options.max_boxes - out.boxes_processed);
  out.boxes_processed += res2.boxes;
  out.resolution_limited += res2.limited;
  if (res2.status != VerifyOutcome::Status::certified) {
    out.status = res2.status;
    out.row = 2;
    out.violation = res2.violation;
    out.point.x0 = res2.point;
    out.worst_box = res2.worst_box;
  }
  return out;
}

double sup_bound(const EtcProblem& problem, const LieChain& chain, const VerifyOptions& options) {
  const Expr top = chain.exprs.back();
  const auto vars = relevant(top, problem.coordinates());
  if (vars.empty()) return eval(top, {});
  Objective obj(top, vars);
  const auto member = ball_member(problem.d);
  const auto point_in = ball_point(problem.d);
  const double min_w = resolve_min_width(problem, options);

  struct Item {
    double upper;
    std::vector<Interval> box;
    bool operator<(const Item& o) const { return upper < o.upper; }
  };
  std::priority_queue<Item> queue;
  std::vector<Interval> scratch;
  double lower = -INFINITY;
  double closed_upper = -INFINITY;  // boxes retired at the width limit
  auto push = [&](std::vector<Interval> box) {
    if (member(box) < 0) return;
    Interval enc = obj.enclose(box, scratch);
    std::vector<double> mid(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) mid[i] = box[i].mid();
    if (point_in(mid)) lower = std::max(lower, obj.f.eval(mid));
    queue.push({enc.hi, std::move(box)});
  };
  push(std::vector<Interval>(vars.size(), Interval(-problem.d, problem.d)));
  std::int64_t boxes = 0;
  const std::int64_t budget = std::min<std::int64_t>(options.max_boxes, 400'000);
  while (!queue.empty() && boxes < budget) {
    Item it = queue.top();
    if (it.upper <= closed_upper) break;
    if (it.upper - lower <= 1e-6 * std::max(std::fabs(lower), 1e-300)) break;
    queue.pop();
    ++boxes;
    const std::size_t k = widest(it.box);
    if (it.box[k].width() <= min_w) {
      closed_upper = std::max(closed_upper, it.upper);
      continue;
    }
    const double m = it.box[k].mid();
    std::vector<Interval> hi = it.box;
    hi[k].lo = m;
    it.box[k].hi = m;
    push(std::move(it.box));
    push(std::move(hi));
  }
  double upper = closed_upper;
  if (!queue.empty()) upper = std::max(upper, queue.top().upper);
  return upper;
}

}  // namespace isostc
