#include <doctest.h>

#include "nashfiber/error.hpp"
#include "nashfiber/subspace.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace nashfiber;

namespace {

constexpr double kPi = std::numbers::pi;

Vec v3(double a, double b, double c) { return Vec{{a, b, c}}; }
Vec v2(double a, double b) { return Vec{{a, b}}; }

Mat cols(std::initializer_list<Vec> vs) {
  Mat m(vs.begin()->size(), static_cast<Eigen::Index>(vs.size()));
  Eigen::Index j = 0;
  for (const auto& v : vs) m.col(j++) = v;
  return m;
}

Mat random_matrix(std::mt19937_64& rng, int n, int k) {
  std::normal_distribution<double> g;
  Mat m(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = g(rng);
  return m;
}

// Independent oracle: the largest principal angle from the eigenvalues of the
// product of orthogonal projectors (cos^2 of the principal angles).
double oracle_angle(const Mat& a, const Mat& b) {
  Eigen::HouseholderQR<Mat> qa(a), qb(b);
  Mat A = qa.householderQ() * Mat::Identity(a.rows(), a.cols());
  Mat B = qb.householderQ() * Mat::Identity(b.rows(), b.cols());
  if (A.cols() > B.cols()) std::swap(A, B);
  Mat m = A.transpose() * B * B.transpose() * A;
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  double c2 = std::clamp(es.eigenvalues().minCoeff(), 0.0, 1.0);
  return std::acos(std::sqrt(c2));
}

}  // namespace

TEST_CASE("angle_vectors basic values") {
  Vec e1 = v3(1, 0, 0), e2 = v3(0, 1, 0);
  CHECK(angle_vectors(e1, e1) == doctest::Approx(0.0));
  CHECK(angle_vectors(Vec::Zero(3), e1) == doctest::Approx(kPi / 2));
  CHECK(angle_vectors(e1, e2) == doctest::Approx(kPi / 2));
  CHECK(angle_vectors(e1, -e1) == doctest::Approx(kPi));
  CHECK_THROWS_AS(angle_vectors(e1, v2(1, 0)), Error);
}

TEST_CASE("angle_vectors matches arccos away from the endpoints") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    Vec a = random_matrix(rng, 4, 1).col(0), b = random_matrix(rng, 4, 1).col(0);
    double ref = std::acos(a.dot(b) / (a.norm() * b.norm()));
    CHECK(angle_vectors(a, b) == doctest::Approx(ref).epsilon(1e-9));
    CHECK(angle_vectors(a, b) == doctest::Approx(angle_vectors(b, a)));
  }
}

TEST_CASE("angle_vector_subspace") {
  GrassPoint xy(cols({v3(1, 0, 0), v3(0, 1, 0)}));
  CHECK(angle_vector_subspace(v3(1, 0, 0), xy) == doctest::Approx(0.0));
  CHECK(angle_vector_subspace(v3(0, 0, 1), xy) == doctest::Approx(kPi / 2));
  // projection of (1,0,1) is (1,0,0); cos = 1/sqrt2
  Vec w = v3(1, 0, 1);
  double ref = std::acos(w.dot(v3(1, 0, 0)) / w.norm());
  CHECK(angle_vector_subspace(w, xy) == doctest::Approx(ref).epsilon(1e-12));
  CHECK_THROWS_AS(angle_vector_subspace(Vec::Zero(3), xy), Error);
}

TEST_CASE("angle_subspaces examples") {
  GrassPoint xy(cols({v3(1, 0, 0), v3(0, 1, 0)}));
  CHECK(angle_subspaces(xy, xy) == doctest::Approx(0.0));
  CHECK(angle_subspaces(line(v3(1, 0, 0)), GrassPoint(cols({v3(0, 1, 0), v3(0, 0, 1)}))) ==
        doctest::Approx(kPi / 2));
  // 1x2 cross-Gram (1/sqrt2, 0): singular value 1/sqrt2
  double sv = Vec{{1 / std::sqrt(2.0), 0.0}}.norm();
  CHECK(angle_subspaces(line(v3(1, 0, 1)), xy) == doctest::Approx(std::acos(sv)).epsilon(1e-12));
  CHECK_THROWS_AS(angle_subspaces(xy, line(v2(1, 0))), Error);
}

TEST_CASE("angle_subspaces agrees with a projector-eigenvalue oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 3 + trial % 3;
    int k1 = 1 + trial % (n - 1);
    int k2 = 1 + (trial / 3) % (n - 1);
    Mat a = random_matrix(rng, n, k1), b = random_matrix(rng, n, k2);
    double got = angle_subspaces(GrassPoint(a), GrassPoint(b));
    CHECK(got == doctest::Approx(oracle_angle(a, b)).epsilon(1e-6));
  }
}

TEST_CASE("small angles are resolved accurately") {
  for (double eps : {1e-4, 1e-7, 1e-10}) {
    GrassPoint p(cols({v3(1, 0, 0), v3(0, 1, 0)}));
    GrassPoint q(cols({v3(1, 0, 0), v3(0, std::cos(eps), std::sin(eps))}));
    CHECK(angle_subspaces(p, q) == doctest::Approx(eps).epsilon(1e-6));
  }
}

TEST_CASE("angle_subspaces is a metric on G(2,4)") {
  std::mt19937_64 rng(2024);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    GrassPoint a(random_matrix(rng, 4, 2)), b(random_matrix(rng, 4, 2)), c(random_matrix(rng, 4, 2));
    double ab = angle_subspaces(a, b), bc = angle_subspaces(b, c), ac = angle_subspaces(a, c);
    if (ab < 0 || ab > kPi / 2 + 1e-12) ++violations;
    if (std::abs(ab - angle_subspaces(b, a)) > 1e-10) ++violations;
    if (ac > ab + bc + 1e-10) ++violations;
    if (angle_subspaces(a, a) > 1e-10) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("zero angle implies containment") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    Mat big = random_matrix(rng, 5, 3);
    Mat coeff = random_matrix(rng, 3, 2);
    GrassPoint hi(big), lo(big * coeff);
    REQUIRE(angle_subspaces(lo, hi) < 1e-10);
    for (Eigen::Index j = 0; j < lo.k(); ++j) {
      Vec col = lo.basis().col(j);
      CHECK((col - hi.project(col)).norm() < 1e-8);
    }
  }
}

TEST_CASE("representation independence") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 200; ++i) {
    Mat b = random_matrix(rng, 5, 3);
    Eigen::HouseholderQR<Mat> qr(random_matrix(rng, 3, 3));
    Mat rot = qr.householderQ() * Mat::Identity(3, 3);
    GrassPoint v(b), w(b * rot);
    CHECK(angle_subspaces(v, w) < 1e-10);
    Mat gram = v.basis().transpose() * v.basis();
    CHECK((gram - Mat::Identity(3, 3)).norm() < 1e-10);
  }
}

TEST_CASE("GrassPoint construction errors and complements") {
  CHECK_THROWS_AS(GrassPoint(cols({v3(1, 0, 0), v3(2, 0, 0)})), Error);
  CHECK_THROWS_AS(line(Vec::Zero(3)), Error);
  GrassPoint n = GrassPoint::orthogonal_complement_of(cols({v3(0, 0, 1)}));
  CHECK(n.k() == 2);
  CHECK(angle_subspaces(n, GrassPoint(cols({v3(1, 0, 0), v3(0, 1, 0)}))) < 1e-12);
  GrassPoint s = span_with(line(v3(1, 0, 0)), v3(0, 0, 2));
  CHECK(s.k() == 2);
  CHECK(angle_vector_subspace(v3(1, 0, 1), s) < 1e-12);
}

TEST_CASE("hausdorff examples and properties") {
  PointCloud a{v2(0, 0)}, b{v2(3, 4)};
  CHECK(hausdorff(a, a) == doctest::Approx(0.0));
  CHECK(hausdorff(a, b) == doctest::Approx(5.0));
  PointCloud c{v2(0, 0), v2(1, 0)}, d{v2(0, 1)};
  double brute = std::max((v2(1, 0) - v2(0, 1)).norm(), (v2(0, 0) - v2(0, 1)).norm());
  CHECK(hausdorff(c, d) == doctest::Approx(brute));
  CHECK(hausdorff(PointCloud{}, PointCloud{}) == 0.0);
  CHECK_THROWS_AS(hausdorff(a, PointCloud{}), Error);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> sz(1, 8);
  for (int i = 0; i < 200; ++i) {
    auto cloud = [&] {
      PointCloud p;
      int m = sz(rng);
      for (int j = 0; j < m; ++j) p.push_back(random_matrix(rng, 3, 1).col(0));
      return p;
    };
    PointCloud x = cloud(), y = cloud(), z = cloud();
    CHECK(hausdorff(x, y) == doctest::Approx(hausdorff(y, x)));
    CHECK(hausdorff(x, z) <= hausdorff(x, y) + hausdorff(y, z) + 1e-12);
  }
}

TEST_CASE("cloud_limit") {
  PointCloud base{v2(1, 0), v2(0, 1)};
  auto constant = cloud_limit({base, base, base, base}, 1e-3);
  CHECK(constant.converged);
  CHECK(hausdorff(constant.limit, base) == 0.0);

  std::vector<PointCloud> shrinking;
  for (int k = 0; k < 20; ++k) {
    double s = std::ldexp(1.0, -k);
    shrinking.push_back({s * v2(1, 0), s * v2(0, 1)});
  }
  auto sh = cloud_limit(shrinking, 1e-3);
  CHECK(sh.converged);
  CHECK(hausdorff(sh.limit, PointCloud{Vec::Zero(2)}) < 1e-3);

  PointCloud other{v2(5, 5)};
  auto osc = cloud_limit({base, other, base, other, base}, 1e-3);
  CHECK_FALSE(osc.converged);
  CHECK(osc.distances.size() == 4);

  CHECK_THROWS_AS(cloud_limit({}, 1e-3), Error);
}

TEST_CASE("conical neighborhoods") {
  Ray r(v3(0, 0, 2));
  CHECK(r.direction().norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(in_conical_neighborhood(v3(0, 0, 1), r, 0.0));
  CHECK_FALSE(in_conical_neighborhood(v3(0, 0, -1), r, 1.0));
  Vec at30 = v3(std::sin(kPi / 6), 0, std::cos(kPi / 6));
  CHECK(in_conical_neighborhood(at30, r, 0.5));
  CHECK_FALSE(in_conical_neighborhood(at30, r, 0.49));
  CHECK(in_conical_neighborhood(v3(1, 0, 0), r, 1.0));
  CHECK_THROWS_AS(in_conical_neighborhood(Vec::Zero(3), r, 0.5), Error);
  CHECK_THROWS_AS(Ray(Vec::Zero(3)), Error);
}
