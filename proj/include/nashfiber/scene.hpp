#pragma once

#include "nashfiber/polynomial.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nashfiber {

/// Tolerance for sign conditions evaluated on coefficient-normalized,
/// radius-rescaled polynomials.
inline constexpr double kSignTol = 1e-9;
/// Residual target for Newton projection (normalized units).
inline constexpr double kNewtonTol = 1e-12;
inline constexpr int kNewtonMaxIter = 50;
/// Relative singular-value cutoff and required gap for tangent spaces.
inline constexpr double kRankTol = 1e-8;
inline constexpr double kGapRatio = 1e6;
/// Rescaled gradients shorter than this count as vanishing: Newton residuals
/// of 1e-12 leave points within about 1e-6 of a singular stratum.
inline constexpr double kGradFloor = 1e-5;

/// Polynomial values rescaled to a ball of radius s around the origin: each
/// polynomial is replaced by u -> f(s u) / max|coef|.
struct ScaledPiece {
  double s = 1.0;
  std::vector<NumericPolynomial> eq, ge, gt, ne;
};

/// {equations = 0, ge >= 0, gt > 0, ne != 0}.
class BasicPiece {
 public:
  BasicPiece(int n, std::vector<Polynomial> equations, std::vector<Polynomial> ge = {},
             std::vector<Polynomial> gt = {}, std::vector<Polynomial> ne = {});

  int n() const { return n_; }
  const std::vector<Polynomial>& equations() const { return eq_; }
  const std::vector<Polynomial>& weak() const { return ge_; }
  const std::vector<Polynomial>& strict() const { return gt_; }
  const std::vector<Polynomial>& exclusions() const { return ne_; }

  ScaledPiece scaled(double s) const;

  friend bool satisfies(const BasicPiece& piece, const Vec& x, double tol);

 private:
  int n_;
  std::vector<Polynomial> eq_, ge_, gt_, ne_;
  std::vector<NumericPolynomial> neq_, nge_, ngt_, nne_;
};

struct Scene {
  std::string name;
  int n = 0;
  int d = 0;
  std::vector<BasicPiece> pieces;
  /// Optional hand-written description of the singular part; when absent it
  /// is derived from the pieces (see derive_singular_locus).
  std::optional<std::vector<BasicPiece>> singular_locus;
  bool origin_on_set = true;
};

/// Validates dimensions and computes origin_on_set.
Scene make_scene(std::string name, int n, int d, std::vector<BasicPiece> pieces,
                 std::optional<std::vector<BasicPiece>> singular_locus = std::nullopt);

/// Raw sign test: |eq| <= tol, ge >= -tol, gt > tol, |ne| > tol.
bool satisfies(const BasicPiece& piece, const Vec& x, double tol);

/// The same test on the rescaled piece at u = x / s.
bool satisfies_scaled(const ScaledPiece& sp, const Vec& u, double tol);

/// Largest |eq| of the rescaled piece at u.
double scaled_residual(const ScaledPiece& sp, const Vec& u);

struct TangentSpaceResult {
  GrassPoint plane;
  double residual = 0.0;  // smallest retained singular value over the largest
  double gap = 0.0;       // retained / discarded singular value ratio
  int rank = 0;
  bool regular = false;
  bool boundary = false;  // some weak inequality is active
};

TangentSpaceResult tangent_space_at(const Scene& scene, std::size_t piece, const Vec& x);

struct NewtonResult {
  Vec x;
  int iterations = 0;
  double residual = 0.0;
};

/// Gauss-Newton projection onto the piece's equations, optionally also onto
/// the sphere of radius r. Throws NoConvergence or SignViolation.
NewtonResult newton_project_detailed(const BasicPiece& piece, const Vec& x0,
                                     std::optional<double> radius = std::nullopt);
Vec newton_project(const BasicPiece& piece, const Vec& x0,
                   std::optional<double> radius = std::nullopt);

/// Pieces whose union contains the non-regular part of the scene near 0:
/// rank drops of each piece's Jacobian (all c x c minors, c = n - d), the
/// boundaries of weak inequalities, and closures of pairwise intersections.
std::vector<BasicPiece> derive_singular_locus(const Scene& scene);

/// Determinant of a square polynomial matrix by cofactor expansion.
Polynomial polynomial_determinant(const std::vector<std::vector<Polynomial>>& m);

}  // namespace nashfiber
