#pragma once

#include "ftcbf/types.hpp"

#include <map>
#include <vector>

namespace ftcbf {

/// Multivariate polynomial over a fixed number of variables, stored as a
/// table from exponent multi-index to coefficient.
class Polynomial {
 public:
  using Exponents = std::vector<int>;

  Polynomial() = default;
  explicit Polynomial(int num_vars) : num_vars_(num_vars) {}

  static Polynomial constant(int num_vars, double value);
  static Polynomial variable(int num_vars, int index);
  /// a^T x + b
  static Polynomial affine(const Vec& a, double b);
  /// (x - center)^T Q (x - center)
  static Polynomial quadratic_form(const Mat& q, const Vec& center);

  int num_vars() const { return num_vars_; }
  const std::map<Exponents, double>& terms() const { return terms_; }

  void add_term(const Exponents& exps, double coeff);

  double operator()(const Vec& x) const;
  Polynomial derivative(int var) const;
  std::vector<Polynomial> gradient() const;
  Vec gradient_at(const Vec& x) const;
  Mat hessian_at(const Vec& x) const;

  int degree() const;
  bool is_affine() const { return degree() <= 1; }
  /// True when every coefficient has magnitude <= tol.
  bool is_zero(double tol = 1e-12) const;

  /// Linear part a (for an affine polynomial) and constant b.
  Vec linear_coefficients() const;
  double constant_term() const;

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  Polynomial& operator+=(const Polynomial& o);

 private:
  int num_vars_ = 0;
  std::map<Exponents, double> terms_;
};

/// Vector field whose entries are polynomials, e.g. a polynomial drift f(x).
using PolyVector = std::vector<Polynomial>;
/// Row-major n x p table of polynomials, e.g. g(x).
using PolyMatrix = std::vector<std::vector<Polynomial>>;

}  // namespace ftcbf
