#pragma once

#include "nashfiber/subspace.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace nashfiber {

using Rational = boost::multiprecision::cpp_rational;
using Exponent = std::vector<int>;

/// Multivariate polynomial over Q in a fixed number of variables.
/// Zero coefficients are never stored.
class Polynomial {
 public:
  explicit Polynomial(int n = 0) : n_(n) {}

  static Polynomial constant(int n, const Rational& c);
  static Polynomial variable(int n, int i);

  int n() const { return n_; }
  const std::map<Exponent, Rational>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;
  int min_degree() const;

  void add_term(const Exponent& e, const Rational& c);

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator-() const;
  Polynomial pow(unsigned k) const;
  bool operator==(const Polynomial& o) const = default;

  /// Partial derivative in variable i (0-based).
  Polynomial derivative(int i) const;

  /// Evaluation with the inputs converted exactly to rationals; rounded once.
  double eval(const Vec& x) const;
  Vec grad(const Vec& x) const;

  /// Canonical text: terms by descending degree, then lexicographic exponent.
  std::string to_string() const;

 private:
  int n_;
  std::map<Exponent, Rational> terms_;
};

/// Parses the polynomial grammar (+ - * / ^ parentheses, integer, rational and
/// decimal constants). Variables are x1..xn, and x,y,z,t when n <= 4.
/// Division is allowed only by nonzero constants.
Polynomial parse_polynomial(std::string_view text, int n);

/// Lowest-degree homogeneous part. Throws ZeroPolynomial on f = 0.
Polynomial initial_form(const Polynomial& f);

/// Double-precision copy of a polynomial for evaluation-heavy loops.
class NumericPolynomial {
 public:
  NumericPolynomial() = default;
  explicit NumericPolynomial(const Polynomial& p);

  int n() const { return n_; }
  bool empty() const { return coef_.empty(); }

  double eval(const Vec& x) const;
  /// Value and gradient in one pass.
  double eval_grad(const Vec& x, Vec& g) const;

  /// Coefficients of u -> f(s u), divided by their largest magnitude.
  NumericPolynomial scaled(double s) const;
  /// Sum of absolute coefficient values.
  double coef_l1() const;

 private:
  int n_ = 0;
  std::vector<std::vector<int>> exps_;
  std::vector<double> coef_;
};

Mat jacobian(const std::vector<Polynomial>& eqs, const Vec& x);

}  // namespace nashfiber
