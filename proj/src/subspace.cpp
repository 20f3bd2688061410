#include "nashfiber/subspace.hpp"

#include "nashfiber/error.hpp"

#include <cmath>
#include <numbers>

namespace nashfiber {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::UnknownVariable: return "UnknownVariable";
    case ErrorKind::ZeroPolynomial: return "ZeroPolynomial";
    case ErrorKind::SingularPoint: return "SingularPoint";
    case ErrorKind::OffVariety: return "OffVariety";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SignViolation: return "SignViolation";
    case ErrorKind::EmptySlice: return "EmptySlice";
    case ErrorKind::AllScalesEmpty: return "AllScalesEmpty";
    case ErrorKind::EmptyPatch: return "EmptyPatch";
    case ErrorKind::NotStabilized: return "NotStabilized";
    case ErrorKind::NotOnCone: return "NotOnCone";
    case ErrorKind::InsufficientDensity: return "InsufficientDensity";
    case ErrorKind::SingularLocusUnavailable: return "SingularLocusUnavailable";
    case ErrorKind::RayNotInCone: return "RayNotInCone";
    case ErrorKind::SingularSample: return "SingularSample";
    case ErrorKind::RayInCone: return "RayInCone";
    case ErrorKind::ProjectionLoss: return "ProjectionLoss";
    case ErrorKind::HypothesisFailed: return "HypothesisFailed";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "IoError";
  }
  return "Unknown";
}

void throw_empty_hausdorff() {
  throw Error(ErrorKind::EmptyInput, "hausdorff: exactly one of the sets is empty");
}

namespace {

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

// Stable angle between two nonzero vectors.
double unit_angle(const Vec& a, const Vec& b) {
  return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

}  // namespace

Ray::Ray(const Vec& direction) {
  if (direction.size() < 1) throw Error(ErrorKind::InvalidArgument, "ray of dimension 0");
  double nrm = direction.norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm)) {
    throw Error(ErrorKind::ZeroVector, "ray direction must be a finite nonzero vector");
  }
  dir_ = direction / nrm;
}

GrassPoint::GrassPoint(Mat basis, Mat complement)
    : basis_(std::move(basis)), complement_(std::move(complement)) {}

GrassPoint::GrassPoint(const Mat& spanning) {
  const Eigen::Index n = spanning.rows();
  const Eigen::Index k = spanning.cols();
  if (k < 1 || k > n) {
    throw Error(ErrorKind::InvalidArgument, "subspace dimension must satisfy 1 <= k <= n");
  }
  if (!spanning.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite basis entry");
  Eigen::ColPivHouseholderQR<Mat> qr(spanning);
  qr.setThreshold(1e-12);
  if (qr.rank() != k) {
    throw Error(ErrorKind::InvalidArgument, "spanning columns are linearly dependent");
  }
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  basis_ = q.leftCols(k);
  complement_ = q.rightCols(n - k);
}

GrassPoint GrassPoint::orthogonal_complement_of(const Mat& normals) {
  const Eigen::Index n = normals.rows();
  const Eigen::Index m = normals.cols();
  if (m == 0) return GrassPoint(Mat::Identity(n, n), Mat(n, 0));
  if (m >= n) throw Error(ErrorKind::InvalidArgument, "complement would be {0}");
  Eigen::ColPivHouseholderQR<Mat> qr(normals);
  qr.setThreshold(1e-12);
  if (qr.rank() != m) throw Error(ErrorKind::InvalidArgument, "normals are linearly dependent");
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  return GrassPoint(q.rightCols(n - m), q.leftCols(m));
}

GrassPoint span_with(const GrassPoint& base, const Vec& v) {
  require_same_dim(base.n(), v.size(), "span_with");
  Mat m(base.n(), base.k() + 1);
  m << base.basis(), v;
  return GrassPoint(m);
}

GrassPoint line(const Vec& v) {
  if (v.norm() == 0.0) throw Error(ErrorKind::ZeroVector, "line through zero vector");
  return GrassPoint(Mat(v));
}

double angle_vectors(const Vec& u, const Vec& v) {
  require_same_dim(u.size(), v.size(), "angle_vectors");
  double nu = u.norm();
  double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return std::numbers::pi / 2;
  return unit_angle(u / nu, v / nv);
}

double angle_vector_subspace(const Vec& v, const GrassPoint& V) {
  require_same_dim(v.size(), V.n(), "angle_vector_subspace");
  double nv = v.norm();
  if (nv == 0.0) throw Error(ErrorKind::ZeroVector, "angle_vector_subspace needs v != 0");
  Vec unit = v / nv;
  Vec coeffs = V.basis().transpose() * unit;
  double cos_part = coeffs.norm();
  double sin_part = (unit - V.basis() * coeffs).norm();
  if (cos_part == 0.0) return std::numbers::pi / 2;
  return std::atan2(sin_part, cos_part);
}

double angle_subspaces(const GrassPoint& a, const GrassPoint& b) {
  require_same_dim(a.n(), b.n(), "angle_subspaces");
  const Mat* lo = &a.basis();
  const Mat* hi = &b.basis();
  if (a.k() == b.k() && a.n() - a.k() < a.k()) {
    // Equal dimensions: the complements have the same largest principal angle.
    if (a.n() == a.k()) return 0.0;
    lo = &a.complement();
    hi = &b.complement();
  } else if (a.k() > b.k()) {
    std::swap(lo, hi);
  }
  if (lo->cols() == 1) {
    Vec c = hi->transpose() * lo->col(0);
    double sin_part = (lo->col(0) - *hi * c).norm();
    return std::atan2(sin_part, c.norm());
  }
  Mat cross = hi->transpose() * *lo;
  Mat resid = *lo - *hi * cross;
  Eigen::JacobiSVD<Mat> svd_cross(cross);
  Eigen::JacobiSVD<Mat> svd_resid(resid);
  double cos_part = std::clamp(svd_cross.singularValues().minCoeff(), 0.0, 1.0);
  double sin_part = std::clamp(svd_resid.singularValues().maxCoeff(), 0.0, 1.0);
  return std::atan2(sin_part, cos_part);
}

double hausdorff(const PointCloud& a, const PointCloud& b) {
  if (!a.empty() && !b.empty()) require_same_dim(a.front().size(), b.front().size(), "hausdorff");
  return hausdorff_generic<Vec>(std::span<const Vec>(a), std::span<const Vec>(b),
                                [](const Vec& x, const Vec& y) { return (x - y).norm(); });
}

double hausdorff_planes(std::span<const GrassPoint> a, std::span<const GrassPoint> b) {
  return hausdorff_generic<GrassPoint>(a, b, [](const GrassPoint& x, const GrassPoint& y) {
    return angle_subspaces(x, y);
  });
}

CloudLimit cloud_limit(const std::vector<PointCloud>& sequence, double tol, double noise_floor,
                       std::size_t window) {
  if (sequence.empty()) throw Error(ErrorKind::EmptyInput, "cloud_limit: empty sequence");
  if (sequence.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "cloud_limit needs at least two clouds");
  }
  CloudLimit out;
  for (std::size_t i = 0; i + 1 < sequence.size(); ++i) {
    out.distances.push_back(hausdorff(sequence[i], sequence[i + 1]));
  }
  const std::size_t m = out.distances.size();
  const std::size_t w = std::min(std::max<std::size_t>(window, 1), m);
  bool ok = true;
  for (std::size_t i = m - w; i < m; ++i) {
    double d = out.distances[i];
    if (!(d < tol)) ok = false;
    if (i > m - w) {
      double prev = out.distances[i - 1];
      bool contracting = d <= 0.9 * prev || d <= noise_floor || d <= kLinearTol;
      if (!contracting) ok = false;
    }
  }
  out.converged = ok;
  if (ok) out.limit = sequence.back();
  return out;
}

double conical_offset(const Vec& x, const Ray& ray) {
  require_same_dim(x.size(), ray.dim(), "conical_offset");
  double nx = x.norm();
  if (nx == 0.0) throw Error(ErrorKind::ZeroVector, "conical neighborhoods exclude the origin");
  Vec unit = x / nx;
  double c = unit.dot(ray.direction());
  if (c < 0.0) return std::numeric_limits<double>::infinity();
  return (unit - c * ray.direction()).norm();
}

bool in_conical_neighborhood(const Vec& x, const Ray& ray, double delta) {
  if (delta < 0.0 || delta > 1.0) {
    throw Error(ErrorKind::InvalidArgument, "conical aperture must lie in [0, 1]");
  }
  return conical_offset(x, ray) <= delta + kLinearTol;
}

}  // namespace nashfiber
