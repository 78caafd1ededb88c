#include <algorithm>
#include <cmath>

#include "isostc/expr.hpp"

namespace isostc {

namespace {

// Coefficients whose magnitude falls this far below the largest one are
// floating-point residue of cancelled terms.
constexpr double kRelativePrune = 1e-15;

void prune(std::map<Polynomial::Exponents, double>& terms) {
  double biggest = 0.0;
  for (const auto& [e, c] : terms) biggest = std::max(biggest, std::fabs(c));
  for (auto it = terms.begin(); it != terms.end();) {
    if (it->second == 0.0 || std::fabs(it->second) <= kRelativePrune * biggest) {
      it = terms.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace

Polynomial Polynomial::constant(std::vector<std::string> vars, double c) {
  Polynomial p(std::move(vars));
  if (c != 0.0) p.terms_[Exponents(p.vars_.size(), 0)] = c;
  return p;
}

void Polynomial::add_term(const Exponents& exps, double coeff) {
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(exps, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
}

bool Polynomial::has_negative_exponents() const {
  for (const auto& [e, c] : terms_) {
    if (std::any_of(e.begin(), e.end(), [](int k) { return k < 0; })) return true;
  }
  return false;
}

int Polynomial::total_degree() const {
  int deg = 0;
  for (const auto& [e, c] : terms_) {
    int d = 0;
    for (int k : e) d += k;
    deg = std::max(deg, d);
  }
  return deg;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r = *this;
  for (const auto& [e, c] : o.terms_) r.add_term(e, c);
  prune(r.terms_);
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  Polynomial r(vars_);
  Exponents sum(vars_.size());
  for (const auto& [ea, ca] : terms_) {
    for (const auto& [eb, cb] : o.terms_) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = ea[i] + eb[i];
      r.add_term(sum, ca * cb);
    }
  }
  prune(r.terms_);
  return r;
}

Polynomial Polynomial::scaled(double s) const {
  Polynomial r(vars_);
  if (s == 0.0) return r;
  for (const auto& [e, c] : terms_) r.terms_[e] = c * s;
  return r;
}

Polynomial Polynomial::pow(int n) const {
  Polynomial result = constant(vars_, 1.0);
  Polynomial base = *this;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

namespace {

std::optional<Polynomial> invert_monomial(const Polynomial& p) {
  if (p.terms().size() != 1) return std::nullopt;
  const auto& [e, c] = *p.terms().begin();
  Polynomial::Exponents neg(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) neg[i] = -e[i];
  Polynomial r(p.variables());
  r.add_term(neg, 1.0 / c);
  return r;
}

}  // namespace

std::optional<Polynomial> to_polynomial(const Expr& e, const std::vector<std::string>& vars) {
  const auto& args = e.args();
  switch (e.kind()) {
    case Expr::Kind::constant:
      return Polynomial::constant(vars, e.value());
    case Expr::Kind::variable: {
      auto it = std::find(vars.begin(), vars.end(), e.name());
      if (it == vars.end()) return std::nullopt;
      Polynomial p(vars);
      Polynomial::Exponents exps(vars.size(), 0);
      exps[static_cast<std::size_t>(it - vars.begin())] = 1;
      p.add_term(exps, 1.0);
      return p;
    }
    case Expr::Kind::sum: {
      Polynomial acc(vars);
      for (const auto& a : args) {
        auto pa = to_polynomial(a, vars);
        if (!pa) return std::nullopt;
        acc = acc + *pa;
      }
      return acc;
    }
    case Expr::Kind::product: {
      Polynomial acc = Polynomial::constant(vars, 1.0);
      for (const auto& a : args) {
        auto pa = to_polynomial(a, vars);
        if (!pa) return std::nullopt;
        acc = acc * *pa;
      }
      return acc;
    }
    case Expr::Kind::quotient: {
      auto num = to_polynomial(args[0], vars);
      auto den = to_polynomial(args[1], vars);
      if (!num || !den) return std::nullopt;
      auto inv = invert_monomial(*den);
      if (!inv) return std::nullopt;
      return *num * *inv;
    }
    case Expr::Kind::negation: {
      auto pa = to_polynomial(args[0], vars);
      if (!pa) return std::nullopt;
      return pa->scaled(-1.0);
    }
    case Expr::Kind::power: {
      auto base = to_polynomial(args[0], vars);
      if (!base) return std::nullopt;
      if (e.exponent() >= 0) return base->pow(e.exponent());
      auto inv = invert_monomial(*base);
      if (!inv) return std::nullopt;
      return inv->pow(-e.exponent());
    }
    case Expr::Kind::sqrt:
      return std::nullopt;
  }
  return std::nullopt;
}

Expr from_polynomial(const Polynomial& p) {
  std::vector<Expr> terms;
  const auto& vars = p.variables();
  for (const auto& [exps, c] : p.terms()) {
    std::vector<Expr> factors;
    for (std::size_t i = 0; i < exps.size(); ++i) {
      if (exps[i] == 0) continue;
      Expr v = Expr::variable(vars[i]);
      factors.push_back(exps[i] == 1 ? v : Expr::power(v, exps[i]));
    }
    if (factors.empty()) {
      terms.push_back(Expr::constant(c));
    } else if (c == 1.0) {
      terms.push_back(Expr::product(std::move(factors)));
    } else if (c == -1.0) {
      terms.push_back(Expr::negation(Expr::product(std::move(factors))));
    } else {
      factors.insert(factors.begin(), Expr::constant(c));
      terms.push_back(Expr::product(std::move(factors)));
    }
  }
  return Expr::sum(std::move(terms));
}

Expr normalize(const Expr& e, const std::vector<std::string>& vars) {
  auto p = to_polynomial(e, vars);
  if (p) return from_polynomial(*p);
  return simplify(e);
}

}  // namespace isostc
