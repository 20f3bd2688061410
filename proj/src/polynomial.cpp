#include "nashfiber/polynomial.hpp"

#include "nashfiber/error.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace nashfiber {

namespace {

int total_degree(const Exponent& e) {
  int d = 0;
  for (int v : e) d += v;
  return d;
}

Rational exact_rational(double v) {
  if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite coordinate");
  if (v == 0.0) return Rational(0);
  int exp = 0;
  double mant = std::frexp(v, &exp);  // v = mant * 2^exp, 0.5 <= |mant| < 1
  auto m = static_cast<long long>(std::ldexp(mant, 53));
  exp -= 53;
  boost::multiprecision::cpp_int num(m);
  boost::multiprecision::cpp_int den(1);
  if (exp > 0) num <<= exp;
  else den <<= -exp;
  return Rational(num, den);
}

std::string var_name(int n, int i) {
  if (n <= 4) return std::string(1, "xyzt"[i]);
  return "x" + std::to_string(i + 1);
}

}  // namespace

Polynomial Polynomial::constant(int n, const Rational& c) {
  Polynomial p(n);
  p.add_term(Exponent(n, 0), c);
  return p;
}

Polynomial Polynomial::variable(int n, int i) {
  if (i < 0 || i >= n) throw Error(ErrorKind::UnknownVariable, "variable index out of range");
  Polynomial p(n);
  Exponent e(n, 0);
  e[i] = 1;
  p.add_term(e, Rational(1));
  return p;
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& [e, c] : terms_) d = std::max(d, total_degree(e));
  return d;
}

int Polynomial::min_degree() const {
  if (terms_.empty()) return -1;
  int d = std::numeric_limits<int>::max();
  for (const auto& [e, c] : terms_) d = std::min(d, total_degree(e));
  return d;
}

void Polynomial::add_term(const Exponent& e, const Rational& c) {
  if (static_cast<int>(e.size()) != n_) {
    throw Error(ErrorKind::DimensionMismatch, "exponent length differs from ambient dimension");
  }
  for (int v : e) {
    if (v < 0) throw Error(ErrorKind::InvalidArgument, "negative exponent");
  }
  if (c == 0) return;
  auto it = terms_.find(e);
  if (it == terms_.end()) {
    terms_.emplace(e, c);
  } else {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  if (o.n_ != n_) throw Error(ErrorKind::DimensionMismatch, "polynomial sum");
  Polynomial r = *this;
  for (const auto& [e, c] : o.terms_) r.add_term(e, c);
  return r;
}

Polynomial Polynomial::operator-() const {
  Polynomial r(n_);
  for (const auto& [e, c] : terms_) r.terms_.emplace(e, -c);
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + (-o); }

Polynomial Polynomial::operator*(const Polynomial& o) const {
  if (o.n_ != n_) throw Error(ErrorKind::DimensionMismatch, "polynomial product");
  Polynomial r(n_);
  for (const auto& [ea, ca] : terms_) {
    for (const auto& [eb, cb] : o.terms_) {
      Exponent e(n_);
      for (int i = 0; i < n_; ++i) e[i] = ea[i] + eb[i];
      r.add_term(e, ca * cb);
    }
  }
  return r;
}

Polynomial Polynomial::pow(unsigned k) const {
  Polynomial result = constant(n_, Rational(1));
  Polynomial base = *this;
  while (k > 0) {
    if (k & 1u) result = result * base;
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return result;
}

Polynomial Polynomial::derivative(int i) const {
  if (i < 0 || i >= n_) throw Error(ErrorKind::InvalidArgument, "derivative index out of range");
  Polynomial r(n_);
  for (const auto& [e, c] : terms_) {
    if (e[i] == 0) continue;
    Exponent d = e;
    d[i] -= 1;
    r.add_term(d, c * e[i]);
  }
  return r;
}

double Polynomial::eval(const Vec& x) const {
  if (x.size() != n_) throw Error(ErrorKind::DimensionMismatch, "polynomial evaluation");
  std::vector<Rational> xs(n_);
  for (int i = 0; i < n_; ++i) xs[i] = exact_rational(x[i]);
  Rational acc(0);
  for (const auto& [e, c] : terms_) {
    Rational t = c;
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < e[i]; ++k) t *= xs[i];
    }
    acc += t;
  }
  return acc.convert_to<double>();
}

Vec Polynomial::grad(const Vec& x) const {
  Vec g(n_);
  for (int i = 0; i < n_; ++i) g[i] = derivative(i).eval(x);
  return g;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::vector<std::pair<Exponent, Rational>> ordered(terms_.begin(), terms_.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    int da = total_degree(a.first), db = total_degree(b.first);
    if (da != db) return da > db;
    return a.first > b.first;
  });
  std::ostringstream out;
  bool first = true;
  for (const auto& [e, c] : ordered) {
    Rational mag = c < 0 ? Rational(-c) : c;
    if (first) {
      if (c < 0) out << "-";
    } else {
      out << (c < 0 ? " - " : " + ");
    }
    first = false;
    bool constant_term = total_degree(e) == 0;
    bool unit = mag == 1;
    if (!unit || constant_term) {
      out << mag.str();
      if (!constant_term) out << "*";
    }
    bool first_var = true;
    for (int i = 0; i < n_; ++i) {
      if (e[i] == 0) continue;
      if (!first_var) out << "*";
      first_var = false;
      out << var_name(n_, i);
      if (e[i] > 1) out << "^" << e[i];
    }
  }
  return out.str();
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, int n) : s_(text), n_(n) {}

  Polynomial parse() {
    Polynomial p = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Syntax, msg + " at position " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial acc = term();
    while (true) {
      if (accept('+')) acc = acc + term();
      else if (accept('-')) acc = acc - term();
      else return acc;
    }
  }

  Polynomial term() {
    Polynomial acc = unary();
    while (true) {
      if (accept('*')) {
        acc = acc * unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        Polynomial d = unary();
        if (d.is_zero()) {
          pos_ = at;
          fail("division by zero");
        }
        if (d.degree() != 0) {
          pos_ = at;
          fail("division by a non-constant");
        }
        Rational inv = Rational(1) / d.terms().begin()->second;
        acc = acc * Polynomial::constant(n_, inv);
      } else {
        return acc;
      }
    }
  }

  Polynomial unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Polynomial power() {
    Polynomial base = primary();
    if (accept('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) fail("expected a nonnegative integer exponent");
      unsigned k = static_cast<unsigned>(std::stoul(std::string(s_.substr(start, pos_ - start))));
      return base.pow(k);
    }
    return base;
  }

  Polynomial primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial p = expr();
      if (!accept(')')) fail("expected ')'");
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return variable();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Polynomial number() {
    std::size_t start = pos_;
    boost::multiprecision::cpp_int num = 0;
    boost::multiprecision::cpp_int den = 1;
    bool digits = false;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      num = num * 10 + (s_[pos_++] - '0');
      digits = true;
    }
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        num = num * 10 + (s_[pos_++] - '0');
        den *= 10;
        digits = true;
      }
    }
    if (!digits) {
      pos_ = start;
      fail("malformed number");
    }
    return Polynomial::constant(n_, Rational(num, den));
  }

  Polynomial variable() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    std::string name(s_.substr(start, pos_ - start));
    if (n_ <= 4 && name.size() == 1) {
      auto at = std::string_view("xyzt").find(name[0]);
      if (at != std::string_view::npos && static_cast<int>(at) < n_) {
        return Polynomial::variable(n_, static_cast<int>(at));
      }
    }
    if (name.size() >= 2 && name[0] == 'x') {
      bool numeric = true;
      for (std::size_t i = 1; i < name.size(); ++i) {
        numeric = numeric && std::isdigit(static_cast<unsigned char>(name[i]));
      }
      if (numeric) {
        int idx = std::stoi(name.substr(1));
        if (idx >= 1 && idx <= n_) return Polynomial::variable(n_, idx - 1);
      }
    }
    throw Error(ErrorKind::UnknownVariable,
                "'" + name + "' at position " + std::to_string(start) + " (n = " +
                    std::to_string(n_) + ")");
  }

  std::string_view s_;
  int n_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(std::string_view text, int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "ambient dimension must be positive");
  return Parser(text, n).parse();
}

Polynomial initial_form(const Polynomial& f) {
  if (f.is_zero()) throw Error(ErrorKind::ZeroPolynomial, "initial form of the zero polynomial");
  int m = f.min_degree();
  Polynomial r(f.n());
  for (const auto& [e, c] : f.terms()) {
    if (total_degree(e) == m) r.add_term(e, c);
  }
  return r;
}

NumericPolynomial::NumericPolynomial(const Polynomial& p) : n_(p.n()) {
  for (const auto& [e, c] : p.terms()) {
    exps_.push_back(e);
    coef_.push_back(c.convert_to<double>());
  }
}

double NumericPolynomial::eval(const Vec& x) const {
  double acc = 0.0;
  for (std::size_t t = 0; t < coef_.size(); ++t) {
    double m = coef_[t];
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < exps_[t][i]; ++k) m *= x[i];
    }
    acc += m;
  }
  return acc;
}

double NumericPolynomial::eval_grad(const Vec& x, Vec& g) const {
  g = Vec::Zero(n_);
  double acc = 0.0;
  for (std::size_t t = 0; t < coef_.size(); ++t) {
    const auto& e = exps_[t];
    double m = coef_[t];
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < e[i]; ++k) m *= x[i];
    }
    acc += m;
    for (int i = 0; i < n_; ++i) {
      if (e[i] == 0) continue;
      double d = coef_[t] * e[i];
      for (int j = 0; j < n_; ++j) {
        int p = j == i ? e[j] - 1 : e[j];
        for (int k = 0; k < p; ++k) d *= x[j];
      }
      g[i] += d;
    }
  }
  return acc;
}

NumericPolynomial NumericPolynomial::scaled(double s) const {
  NumericPolynomial r = *this;
  double big = 0.0;
  for (std::size_t t = 0; t < coef_.size(); ++t) {
    int deg = 0;
    for (int v : exps_[t]) deg += v;
    r.coef_[t] = coef_[t] * std::pow(s, deg);
    big = std::max(big, std::abs(r.coef_[t]));
  }
  if (big > 0.0) {
    for (double& c : r.coef_) c /= big;
  }
  return r;
}

double NumericPolynomial::coef_l1() const {
  double s = 0.0;
  for (double c : coef_) s += std::abs(c);
  return s;
}

Mat jacobian(const std::vector<Polynomial>& eqs, const Vec& x) {
  Mat j(static_cast<Eigen::Index>(eqs.size()), x.size());
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    if (eqs[i].n() != x.size()) throw Error(ErrorKind::DimensionMismatch, "jacobian");
    j.row(static_cast<Eigen::Index>(i)) = eqs[i].grad(x).transpose();
  }
  return j;
}

}  // namespace nashfiber
