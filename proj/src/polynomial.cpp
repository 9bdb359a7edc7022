#include "ftcbf/polynomial.hpp"

#include <cmath>

namespace ftcbf {

Polynomial Polynomial::constant(int num_vars, double value) {
  Polynomial p(num_vars);
  p.add_term(Exponents(num_vars, 0), value);
  return p;
}

Polynomial Polynomial::variable(int num_vars, int index) {
  require(index >= 0 && index < num_vars, "Polynomial::variable: index out of range");
  Polynomial p(num_vars);
  Exponents e(num_vars, 0);
  e[index] = 1;
  p.add_term(e, 1.0);
  return p;
}

Polynomial Polynomial::affine(const Vec& a, double b) {
  const int n = static_cast<int>(a.size());
  Polynomial p = constant(n, b);
  for (int i = 0; i < n; ++i) {
    if (a(i) != 0.0) p += variable(n, i) * a(i);
  }
  return p;
}

Polynomial Polynomial::quadratic_form(const Mat& q, const Vec& center) {
  const int n = static_cast<int>(center.size());
  require(q.rows() == n && q.cols() == n, "Polynomial::quadratic_form: dimension mismatch");
  std::vector<Polynomial> shifted;
  shifted.reserve(n);
  for (int i = 0; i < n; ++i) shifted.push_back(variable(n, i) - constant(n, center(i)));
  Polynomial p(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (q(i, j) != 0.0) p += shifted[i] * shifted[j] * q(i, j);
    }
  }
  return p;
}

void Polynomial::add_term(const Exponents& exps, double coeff) {
  require(static_cast<int>(exps.size()) == num_vars_, "Polynomial::add_term: exponent size mismatch");
  if (coeff == 0.0) return;
  auto& c = terms_[exps];
  c += coeff;
  if (c == 0.0) terms_.erase(exps);
}

double Polynomial::operator()(const Vec& x) const {
  require(x.size() == num_vars_, "Polynomial: evaluation point has wrong dimension");
  double sum = 0.0;
  for (const auto& [exps, coeff] : terms_) {
    double term = coeff;
    for (int i = 0; i < num_vars_; ++i) {
      for (int k = 0; k < exps[i]; ++k) term *= x(i);
    }
    sum += term;
  }
  return sum;
}

Polynomial Polynomial::derivative(int var) const {
  Polynomial d(num_vars_);
  for (const auto& [exps, coeff] : terms_) {
    if (exps[var] == 0) continue;
    Exponents e = exps;
    const int power = e[var];
    e[var] -= 1;
    d.add_term(e, coeff * power);
  }
  return d;
}

std::vector<Polynomial> Polynomial::gradient() const {
  std::vector<Polynomial> g;
  g.reserve(num_vars_);
  for (int i = 0; i < num_vars_; ++i) g.push_back(derivative(i));
  return g;
}

Vec Polynomial::gradient_at(const Vec& x) const {
  Vec g(num_vars_);
  for (int i = 0; i < num_vars_; ++i) g(i) = derivative(i)(x);
  return g;
}

Mat Polynomial::hessian_at(const Vec& x) const {
  Mat h(num_vars_, num_vars_);
  for (int i = 0; i < num_vars_; ++i) {
    const Polynomial di = derivative(i);
    for (int j = i; j < num_vars_; ++j) {
      h(i, j) = di.derivative(j)(x);
      h(j, i) = h(i, j);
    }
  }
  return h;
}

int Polynomial::degree() const {
  int deg = 0;
  for (const auto& [exps, coeff] : terms_) {
    int d = 0;
    for (int e : exps) d += e;
    deg = std::max(deg, d);
  }
  return deg;
}

bool Polynomial::is_zero(double tol) const {
  for (const auto& [exps, coeff] : terms_) {
    if (std::abs(coeff) > tol) return false;
  }
  return true;
}

Vec Polynomial::linear_coefficients() const {
  Vec a = Vec::Zero(num_vars_);
  for (const auto& [exps, coeff] : terms_) {
    int total = 0;
    int idx = -1;
    for (int i = 0; i < num_vars_; ++i) {
      total += exps[i];
      if (exps[i] == 1) idx = i;
    }
    if (total == 1) a(idx) += coeff;
  }
  return a;
}

double Polynomial::constant_term() const {
  auto it = terms_.find(Exponents(num_vars_, 0));
  return it == terms_.end() ? 0.0 : it->second;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r = *this;
  r += o;
  return r;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (num_vars_ == 0 && terms_.empty()) num_vars_ = o.num_vars_;
  require(num_vars_ == o.num_vars_, "Polynomial: variable count mismatch");
  for (const auto& [exps, coeff] : o.terms_) add_term(exps, coeff);
  return *this;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + o * -1.0; }

Polynomial Polynomial::operator*(const Polynomial& o) const {
  require(num_vars_ == o.num_vars_, "Polynomial: variable count mismatch");
  Polynomial r(num_vars_);
  for (const auto& [ea, ca] : terms_) {
    for (const auto& [eb, cb] : o.terms_) {
      Exponents e(num_vars_);
      for (int i = 0; i < num_vars_; ++i) e[i] = ea[i] + eb[i];
      r.add_term(e, ca * cb);
    }
  }
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r(num_vars_);
  for (const auto& [exps, coeff] : terms_) r.add_term(exps, coeff * s);
  return r;
}

}  // namespace ftcbf
