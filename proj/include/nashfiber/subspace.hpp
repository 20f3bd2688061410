#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace nashfiber {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using PointCloud = std::vector<Vec>;

/// Absolute tolerance used by the linear-algebra layer.
inline constexpr double kLinearTol = 1e-10;

/// Open ray from the origin, stored by its unit direction.
class Ray {
 public:
  /// Normalizes `direction`; throws ZeroVector on a zero input.
  explicit Ray(const Vec& direction);

  const Vec& direction() const { return dir_; }
  Eigen::Index dim() const { return dir_.size(); }

 private:
  Vec dir_;
};

/// A k-dimensional linear subspace of R^n stored as an orthonormal basis.
/// The basis is re-orthonormalized on construction, so two GrassPoints with
/// the same span are at angle 0 regardless of how they were built.
class GrassPoint {
 public:
  /// Columns of `spanning` must be linearly independent (rank k).
  explicit GrassPoint(const Mat& spanning);

  /// Orthogonal complement of span(normals) (normals are the columns).
  static GrassPoint orthogonal_complement_of(const Mat& normals);

  const Mat& basis() const { return basis_; }
  /// Orthonormal basis of the orthogonal complement (n x (n-k)).
  const Mat& complement() const { return complement_; }
  Eigen::Index n() const { return basis_.rows(); }
  Eigen::Index k() const { return basis_.cols(); }

  Vec project(const Vec& x) const { return basis_ * (basis_.transpose() * x); }
  Mat projector() const { return basis_ * basis_.transpose(); }

 private:
  GrassPoint(Mat basis, Mat complement);
  Mat basis_;
  Mat complement_;
};

/// Direct sum of a subspace with span{v}; re-orthonormalized.
GrassPoint span_with(const GrassPoint& base, const Vec& v);
/// Subspace spanned by a single nonzero vector.
GrassPoint line(const Vec& v);

/// Angle in [0, pi]. Returns pi/2 when either vector is zero.
double angle_vectors(const Vec& u, const Vec& v);

/// Angle between a nonzero vector and its projection onto `V`, in [0, pi/2].
double angle_vector_subspace(const Vec& v, const GrassPoint& V);

/// Largest principal angle, mapping the lower-dimensional subspace into the
/// higher-dimensional one. A metric on each fixed-dimension Grassmannian.
double angle_subspaces(const GrassPoint& a, const GrassPoint& b);

/// Brute-force Hausdorff distance between two finite sets under `dist`.
/// Both empty gives 0; exactly one empty throws EmptyInput.
template <class T, class Dist>
double hausdorff_generic(std::span<const T> a, std::span<const T> b, Dist&& dist);

/// Euclidean Hausdorff distance between point clouds.
double hausdorff(const PointCloud& a, const PointCloud& b);

/// Hausdorff distance between two sets of subspaces under angle_subspaces.
double hausdorff_planes(std::span<const GrassPoint> a, std::span<const GrassPoint> b);

struct CloudLimit {
  bool converged = false;
  PointCloud limit;                 // the last cloud, when converged
  std::vector<double> distances;    // consecutive Hausdorff distances
};

/// Hausdorff-Cauchy test on a sequence of clouds. The trailing `window`
/// consecutive distances must all be below `tol`, and each must contract by a
/// factor <= 0.9 unless it is already at or below `noise_floor`.
CloudLimit cloud_limit(const std::vector<PointCloud>& sequence, double tol,
                       double noise_floor = 0.0, std::size_t window = 3);

/// Membership in the closed delta-conical neighborhood of a ray:
/// angle <= pi/2 and sin(angle) <= delta.
bool in_conical_neighborhood(const Vec& x, const Ray& ray, double delta);

/// Sine of the angle between x and the ray, or +inf when the angle exceeds pi/2.
double conical_offset(const Vec& x, const Ray& ray);

// --- template implementation ---

[[noreturn]] void throw_empty_hausdorff();

template <class T, class Dist>
double hausdorff_generic(std::span<const T> a, std::span<const T> b, Dist&& dist) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) {
    throw_empty_hausdorff();
  }
  std::vector<double> best_b(b.size(), std::numeric_limits<double>::infinity());
  double sup_a = 0.0;
  for (const auto& x : a) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) {
      double d = dist(x, b[j]);
      best = std::min(best, d);
      best_b[j] = std::min(best_b[j], d);
    }
    sup_a = std::max(sup_a, best);
  }
  double sup_b = 0.0;
  for (double d : best_b) sup_b = std::max(sup_b, d);
  return std::max(sup_a, sup_b);
}

}  // namespace nashfiber
