#include <doctest.h>

#include "nashfiber/error.hpp"
#include "nashfiber/polynomial.hpp"

#include <random>

using namespace nashfiber;

namespace {

Polynomial random_poly(std::mt19937_64& rng, int n, int max_terms, int max_deg) {
  std::uniform_int_distribution<int> terms(1, max_terms), deg(0, max_deg), coef(-9, 9);
  Polynomial p(n);
  int t = terms(rng);
  for (int i = 0; i < t; ++i) {
    Exponent e(n);
    for (int& v : e) v = deg(rng);
    p.add_term(e, Rational(coef(rng), 1 + std::abs(coef(rng))));
  }
  return p;
}

}  // namespace

TEST_CASE("parse the umbrella polynomial") {
  Polynomial f = parse_polynomial("x^2 - y^2*z", 3);
  CHECK(f.terms().size() == 2);
  CHECK(f.terms().at(Exponent{2, 0, 0}) == 1);
  CHECK(f.terms().at(Exponent{0, 2, 1}) == -1);
  CHECK(f == parse_polynomial("x1^2 - x2^2*x3", 3));
}

TEST_CASE("parse zero and expansion") {
  CHECK(parse_polynomial("0", 3).is_zero());
  CHECK(parse_polynomial("x - x", 3).is_zero());
  Polynomial f = parse_polynomial("x^2 + (y-z)^2 + z^4 - z^2", 3);
  // x^2 + y^2 - 2yz + z^4 after the z^2 terms cancel
  CHECK(f.terms().size() == 4);
  Polynomial g = parse_polynomial("x^2 + y^2 - 2*y*z + z^4", 3);
  CHECK(f == g);
}

TEST_CASE("parse constants and decimals") {
  Polynomial f = parse_polynomial("0.5*x + 3/4 - (2)", 2);
  CHECK(f.terms().at(Exponent{1, 0}) == Rational(1, 2));
  CHECK(f.terms().at(Exponent{0, 0}) == Rational(-5, 4));
  CHECK(parse_polynomial("-(x+1)^3", 1) == parse_polynomial("-x^3 - 3*x^2 - 3*x - 1", 1));
}

TEST_CASE("parse-print-parse is idempotent") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    int n = 1 + i % 6;
    Polynomial p = random_poly(rng, n, 6, 3);
    std::string text = p.to_string();
    Polynomial q = parse_polynomial(text, n);
    CHECK(q == p);
    CHECK(q.to_string() == text);
  }
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_polynomial("x +", 2), Error);
  CHECK_THROWS_AS(parse_polynomial("x * (y", 2), Error);
  CHECK_THROWS_AS(parse_polynomial("x / y", 2), Error);
  CHECK_THROWS_AS(parse_polynomial("x / 0", 2), Error);
  try {
    parse_polynomial("x + w", 3);
    FAIL("expected UnknownVariable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownVariable);
  }
  try {
    parse_polynomial("z", 2);
    FAIL("expected UnknownVariable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownVariable);
  }
  try {
    parse_polynomial("x $ y", 2);
    FAIL("expected SyntaxError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Syntax);
    CHECK(std::string(e.what()).find("position 2") != std::string::npos);
  }
  CHECK_NOTHROW(parse_polynomial("x5 - x1", 5));
  CHECK_THROWS_AS(parse_polynomial("x6", 5), Error);
}

TEST_CASE("evaluation and gradients") {
  Polynomial f = parse_polynomial("x^2 - y^2*z", 3);
  double y0 = 0.7;
  Vec g = f.grad(Vec{{0.0, y0, 0.0}});
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == doctest::Approx(-y0 * y0));
  // gradient (2x, -2yz, -y^2) at a generic point
  Vec p{{0.3, -1.1, 0.4}};
  Vec gp = f.grad(p);
  CHECK(gp[0] == doctest::Approx(2 * 0.3));
  CHECK(gp[1] == doctest::Approx(-2 * -1.1 * 0.4));
  CHECK(gp[2] == doctest::Approx(-1.1 * 1.1));

  Polynomial h = parse_polynomial("x^2 + y^2 - z^3", 3);
  Vec gh = h.grad(Vec{{0.0, 0.0, 1.0}});
  CHECK(gh[0] == 0.0);
  CHECK(gh[1] == 0.0);
  CHECK(gh[2] == -3.0);

  Polynomial c = parse_polynomial("x*y + 7/3", 2);
  CHECK(c.eval(Vec::Zero(2)) == doctest::Approx(7.0 / 3.0));
}

TEST_CASE("gradients agree with central differences") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    int n = 2 + i % 3;
    Polynomial p = random_poly(rng, n, 5, 3);
    Vec x(n);
    for (int j = 0; j < n; ++j) x[j] = U(rng);
    Vec g = p.grad(x);
    NumericPolynomial np(p);
    Vec gn;
    np.eval_grad(x, gn);
    for (int j = 0; j < n; ++j) {
      Vec xp = x, xm = x;
      xp[j] += 1e-6;
      xm[j] -= 1e-6;
      double fd = (p.eval(xp) - p.eval(xm)) / 2e-6;
      double scale = std::max(1.0, std::abs(g[j]));
      if (std::abs(fd - g[j]) > 1e-5 * scale) ++bad;
      if (std::abs(gn[j] - g[j]) > 1e-12 * scale) ++bad;
    }
    CHECK(np.eval(x) == doctest::Approx(p.eval(x)).epsilon(1e-12));
  }
  CHECK(bad == 0);
}

TEST_CASE("initial forms") {
  CHECK(initial_form(parse_polynomial("x^2 - y^2*z", 3)) == parse_polynomial("x^2", 3));
  CHECK(initial_form(parse_polynomial("x^2 + y^2 - z^3", 3)) == parse_polynomial("x^2 + y^2", 3));
  Polynomial h = parse_polynomial("x*y - 3*z^2", 3);
  CHECK(initial_form(h) == h);
  CHECK_THROWS_AS(initial_form(Polynomial(3)), Error);
}

TEST_CASE("initial form is multiplicative") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    Polynomial f = random_poly(rng, 3, 4, 3), g = random_poly(rng, 3, 4, 3);
    if (f.is_zero() || g.is_zero()) continue;
    CHECK(initial_form(f * g) == initial_form(f) * initial_form(g));
  }
}

TEST_CASE("scaled numeric polynomials") {
  NumericPolynomial f(parse_polynomial("x^2 - y^2*z", 3));
  NumericPolynomial s = f.scaled(0.5);
  // f(0.5 u) = 0.25 x^2 - 0.125 y^2 z, divided by 0.25
  Vec u{{1.0, 1.0, 1.0}};
  CHECK(s.eval(u) == doctest::Approx(1.0 - 0.5));
  CHECK(s.coef_l1() == doctest::Approx(1.5));
}
