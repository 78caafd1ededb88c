#include <algorithm>
#include <cmath>
#include <cstring>

#include "isostc/expr.hpp"

namespace isostc {

namespace {

double ipow(double x, int n) {
  if (n < 0) {
    if (x == 0.0) throw EvalError("division by zero in negative power");
    return 1.0 / ipow(x, -n);
  }
  double r = 1.0;
  while (n > 0) {
    if (n & 1) r *= x;
    x *= x;
    n >>= 1;
  }
  return r;
}

std::string key_of(int op, int a, int b, int k, double c) {
  std::string key(sizeof(int) * 4 + sizeof(double), '\0');
  char* p = key.data();
  std::memcpy(p, &op, sizeof(int));
  std::memcpy(p + sizeof(int), &a, sizeof(int));
  std::memcpy(p + 2 * sizeof(int), &b, sizeof(int));
  std::memcpy(p + 3 * sizeof(int), &k, sizeof(int));
  std::memcpy(p + 4 * sizeof(int), &c, sizeof(double));
  return key;
}

}  // namespace

CompiledExpr::CompiledExpr(const Expr& e, std::vector<std::string> vars) : vars_(std::move(vars)) {
  std::map<std::string, int> memo;
  root_ = emit(e, memo);
}

int CompiledExpr::emit(const Expr& e, std::map<std::string, int>& memo) {
  auto push = [&](Op op, int a, int b, int k, double c) {
    std::string key = key_of(static_cast<int>(op), a, b, k, c);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    ops_.push_back({op, a, b, k, c});
    const int slot = static_cast<int>(ops_.size()) - 1;
    memo.emplace(std::move(key), slot);
    return slot;
  };
  const auto& args = e.args();
  switch (e.kind()) {
    case Expr::Kind::constant:
      return push(Op::constant, -1, -1, 0, e.value());
    case Expr::Kind::variable: {
      auto it = std::find(vars_.begin(), vars_.end(), e.name());
      if (it == vars_.end()) throw EvalError("unbound variable '" + e.name() + "'");
      return push(Op::variable, -1, -1, static_cast<int>(it - vars_.begin()), 0.0);
    }
    case Expr::Kind::sum: {
      int acc = -1;
      for (const auto& t : args) {
        const bool negated = t.kind() == Expr::Kind::negation;
        const int s = emit(negated ? t.args()[0] : t, memo);
        if (acc < 0) {
          acc = negated ? push(Op::neg, s, -1, 0, 0.0) : s;
        } else {
          acc = push(negated ? Op::sub : Op::add, acc, s, 0, 0.0);
        }
      }
      return acc;
    }
    case Expr::Kind::product: {
      int acc = emit(args[0], memo);
      for (std::size_t i = 1; i < args.size(); ++i) acc = push(Op::mul, acc, emit(args[i], memo), 0, 0.0);
      return acc;
    }
    case Expr::Kind::quotient: {
      const int a = emit(args[0], memo);
      const int b = emit(args[1], memo);
      return push(Op::div, a, b, 0, 0.0);
    }
    case Expr::Kind::negation:
      return push(Op::neg, emit(args[0], memo), -1, 0, 0.0);
    case Expr::Kind::power:
      return push(Op::pow, emit(args[0], memo), -1, e.exponent(), 0.0);
    case Expr::Kind::sqrt:
      return push(Op::sqrt, emit(args[0], memo), -1, 0, 0.0);
  }
  return -1;
}

double CompiledExpr::eval(std::span<const double> point) const {
  std::vector<double> r(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Instr& in = ops_[i];
    switch (in.op) {
      case Op::constant:
        r[i] = in.c;
        break;
      case Op::variable:
        r[i] = point[static_cast<std::size_t>(in.k)];
        break;
      case Op::add:
        r[i] = r[in.a] + r[in.b];
        break;
      case Op::sub:
        r[i] = r[in.a] - r[in.b];
        break;
      case Op::mul:
        r[i] = r[in.a] * r[in.b];
        break;
      case Op::div:
        if (r[in.b] == 0.0) throw EvalError("division by zero");
        r[i] = r[in.a] / r[in.b];
        break;
      case Op::neg:
        r[i] = -r[in.a];
        break;
      case Op::pow:
        r[i] = ipow(r[in.a], in.k);
        break;
      case Op::sqrt:
        if (r[in.a] < 0.0) throw EvalError("square root of negative value");
        r[i] = std::sqrt(r[in.a]);
        break;
    }
  }
  return r[static_cast<std::size_t>(root_)];
}

Interval CompiledExpr::eval(std::span<const Interval> box) const {
  std::vector<Interval> scratch;
  return eval(box, scratch);
}

Interval CompiledExpr::eval(std::span<const Interval> box, std::vector<Interval>& r) const {
  r.resize(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Instr& in = ops_[i];
    switch (in.op) {
      case Op::constant:
        r[i] = Interval(in.c);
        break;
      case Op::variable:
        r[i] = box[static_cast<std::size_t>(in.k)];
        break;
      case Op::add:
        r[i] = r[in.a] + r[in.b];
        break;
      case Op::sub:
        r[i] = r[in.a] - r[in.b];
        break;
      case Op::mul:
        r[i] = r[in.a] * r[in.b];
        break;
      case Op::div:
        r[i] = r[in.a] / r[in.b];
        break;
      case Op::neg:
        r[i] = -r[in.a];
        break;
      case Op::pow:
        r[i] = pow(r[in.a], in.k);
        break;
      case Op::sqrt:
        r[i] = sqrt(r[in.a]);
        break;
    }
  }
  return r[static_cast<std::size_t>(root_)];
}

}  // namespace isostc
