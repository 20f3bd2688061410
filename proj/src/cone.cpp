#include "nashfiber/cone.hpp"

#include "nashfiber/error.hpp"

#include <cmath>
#include <numeric>

namespace nashfiber {

namespace {

constexpr double kDimCap = 0.15;
constexpr int kDimCenters = 8;
constexpr double kTangentCap = 0.2;
constexpr double kSmallCap = 0.1;
constexpr double kNoiseCap = 0.05;
constexpr int kMinCapPoints = 8;

int default_count(int n) {
  switch (n) {
    case 1: return 8;
    case 2: return 400;
    case 3: return 4000;
    case 4: return 2500;
    default: return 1500 * n;
  }
}

double scale_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  return hausdorff(a, b);
}

struct CapStats {
  std::size_t count = 0;
  Mat offsets;   // tangential offsets at v, one per column
  Vec spread;   // share of far offset directions per principal axis, descending
  Mat axes;      // principal axes, same order
  std::size_t far = 0;
};

CapStats cap_stats(const PointCloud& cloud, const Vec& v, double rho) {
  std::vector<Vec> pick;
  for (const auto& u : cloud) {
    if ((u - v).norm() <= rho) pick.push_back(u - u.dot(v) * v);
  }
  CapStats s;
  s.count = pick.size();
  const Eigen::Index n = v.size();
  s.offsets.resize(n, static_cast<Eigen::Index>(pick.size()));
  for (std::size_t i = 0; i < pick.size(); ++i) s.offsets.col(static_cast<Eigen::Index>(i)) = pick[i];
  if (pick.empty()) {
    s.spread = Vec::Zero(n);
    s.axes = Mat::Identity(n, n);
    return s;
  }
  // Principal axes of the directions of the offsets that reach beyond a
  // quarter of the cap; point masses near v do not dilute the spread.
  Mat m = Mat::Zero(n, n);
  std::size_t far = 0;
  for (const auto& t : pick) {
    double tn = t.norm();
    if (tn <= 0.25 * rho) continue;
    m += t * t.transpose() / (tn * tn);
    ++far;
  }
  if (far > 0) m /= static_cast<double>(far);
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  s.spread.resize(n);
  s.axes.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.spread[i] = std::max(0.0, es.eigenvalues()[n - 1 - i]);
    s.axes.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  s.far = far;
  return s;
}

int cap_dimension(const CapStats& s) {
  if (s.far < 3) return 0;
  int m = 0;
  for (Eigen::Index i = 0; i < s.spread.size(); ++i) {
    if (s.spread[i] >= 0.05) ++m;
  }
  return m;
}

bool one_sided(const CapStats& s, const Mat& basis, double rho) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    int pos = 0, neg = 0;
    for (Eigen::Index i = 0; i < s.offsets.cols(); ++i) {
      double c = s.offsets.col(i).dot(basis.col(j));
      if (c > 0.25 * rho) ++pos;
      if (c < -0.25 * rho) ++neg;
    }
    int hi = std::max(pos, neg), lo = std::min(pos, neg);
    if (hi >= 3 && hi > 3 * lo) return true;
  }
  return false;
}

// RMS residual of the normal coordinates fitted by quadratics in the link
// coordinates.
double quadratic_residual(const CapStats& s, const Vec& v, const Mat& basis) {
  const Eigen::Index n = v.size();
  const Eigen::Index m = basis.cols();
  const Eigen::Index N = s.offsets.cols();
  if (m == 0 || N == 0) return 0.0;
  Mat frame(n, m + 1);
  frame << basis, v;
  Mat normal = GrassPoint(frame).complement();
  if (normal.cols() == 0) return 0.0;
  const Eigen::Index feats = 1 + m + m * (m + 1) / 2;
  if (N <= feats) return 0.0;
  Mat A(N, feats);
  Mat coords = basis.transpose() * s.offsets;
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::Index c = 0;
    A(i, c++) = 1.0;
    for (Eigen::Index a = 0; a < m; ++a) A(i, c++) = coords(a, i);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = a; b < m; ++b) A(i, c++) = coords(a, i) * coords(b, i);
  }
  Mat rhs = (normal.transpose() * s.offsets).transpose();
  Mat fit = A.colPivHouseholderQr().solve(rhs);
  Mat res = rhs - A * fit;
  return std::sqrt(res.squaredNorm() / static_cast<double>(N));
}

int cluster_dimension(const PointCloud& cloud, const std::vector<std::size_t>& members,
                      double diameter) {
  if (diameter < kLinkEps || members.size() < static_cast<std::size_t>(kMinCapPoints)) return 0;
  // farthest-point centers
  std::vector<std::size_t> centers{members.front()};
  std::vector<double> dist(members.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < kDimCenters) {
    const Vec& c = cloud[centers.back()];
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      dist[i] = std::min(dist[i], (cloud[members[i]] - c).norm());
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    if (best_d < kDimCap) break;
    centers.push_back(members[best]);
  }
  PointCloud local;
  for (std::size_t i : members) local.push_back(cloud[i]);
  std::vector<int> dims;
  for (std::size_t c : centers) {
    const Vec& v = cloud[c];
    std::vector<Vec> off;
    Vec mean = Vec::Zero(v.size());
    for (const auto& u : local) {
      if ((u - v).norm() <= kDimCap) {
        off.push_back(u - u.dot(v) * v);
        mean += off.back();
      }
    }
    if (off.size() < static_cast<std::size_t>(kMinCapPoints)) continue;
    mean /= static_cast<double>(off.size());
    Mat cov = Mat::Zero(v.size(), v.size());
    for (const auto& o : off) cov += (o - mean) * (o - mean).transpose();
    cov /= static_cast<double>(off.size());
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    int dim = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      if (std::sqrt(std::max(0.0, es.eigenvalues()[i])) >= 0.15 * kDimCap) ++dim;
    }
    dims.push_back(dim);
  }
  if (dims.empty()) return 0;
  std::sort(dims.begin(), dims.end());
  return dims[(dims.size() - 1) / 2];
}

}  // namespace

std::vector<std::vector<std::size_t>> linkage_components(const PointCloud& pts, double eps) {
  const std::size_t N = pts.size();
  std::vector<int> label(N, -1);
  std::vector<std::vector<std::size_t>> comps;
  for (std::size_t s = 0; s < N; ++s) {
    if (label[s] >= 0) continue;
    const int id = static_cast<int>(comps.size());
    comps.emplace_back();
    std::vector<std::size_t> stack{s};
    label[s] = id;
    while (!stack.empty()) {
      std::size_t i = stack.back();
      stack.pop_back();
      comps.back().push_back(i);
      for (std::size_t j = 0; j < N; ++j) {
        if (label[j] < 0 && (pts[i] - pts[j]).norm() <= eps) {
          label[j] = id;
          stack.push_back(j);
        }
      }
    }
    std::sort(comps.back().begin(), comps.back().end());
  }
  return comps;
}

ConeEstimate estimate_cone(const Scene& scene, const ConeOptions& opts) {
  opts.schedule.validate();
  if (!scene.origin_on_set) throw Error(ErrorKind::InvalidArgument, "origin is not on the scene");
  const int count = opts.count > 0 ? opts.count : default_count(scene.n);
  ConeEstimate cone;
  cone.n = scene.n;
  cone.d = scene.d;
  SampleOptions so;
  so.require_regular = opts.require_regular;
  so.jobs = opts.jobs;
  for (int k = 1; k <= opts.schedule.K; ++k) {
    const double r = opts.schedule.radius(k);
    ScaleSample s = sample_sphere(scene, r, count, opts.schedule.seed ^ static_cast<std::uint64_t>(k), so);
    PointCloud dirs;
    std::vector<std::size_t> pieces;
    for (const auto& p : s.points) {
      dirs.push_back(p.x / p.x.norm());
      pieces.push_back(p.piece);
    }
    cone.radii.push_back(r);
    cone.link_samples.push_back(std::move(dirs));
    cone.link_pieces.push_back(std::move(pieces));
  }
  for (std::size_t i = 0; i + 1 < cone.link_samples.size(); ++i) {
    cone.trace.push_back(scale_distance(cone.link_samples[i], cone.link_samples[i + 1]));
  }
  cone.finest = cone.link_samples.size() - 1;

  // Hausdorff-Cauchy check on the trailing clouds.
  const std::size_t window = std::min<std::size_t>(4, cone.link_samples.size());
  std::vector<PointCloud> tail(cone.link_samples.end() - static_cast<std::ptrdiff_t>(window),
                               cone.link_samples.end());
  std::size_t empties = 0;
  for (const auto& c : tail) empties += c.empty() ? 1 : 0;
  if (window < 2 || empties == tail.size()) {
    cone.stabilized = true;
  } else if (empties == 0) {
    cone.stabilized = cloud_limit(tail, kLinkEps, kLinkEps).converged;
  } else {
    cone.stabilized = false;
  }
  if (!cone.stabilized) {
    std::string t;
    for (double d : cone.trace) t += " " + std::to_string(d);
    throw Error(ErrorKind::NotStabilized, "link clouds did not settle; trace:" + t);
  }

  for (const auto& piece : scene.pieces) {
    std::vector<Polynomial> forms;
    for (const auto& e : piece.equations()) {
      if (!e.is_zero()) forms.push_back(initial_form(e));
    }
    cone.initial_forms.push_back(std::move(forms));
  }

  const PointCloud& link = cone.link();
  for (auto& members : linkage_components(link, kLinkEps)) {
    LinkCluster c;
    Vec mean = Vec::Zero(scene.n);
    for (std::size_t i : members) mean += link[i];
    c.center = mean.norm() > 1e-12 ? Vec(mean.normalized()) : link[members.front()];
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        c.diameter = std::max(c.diameter, (link[members[a]] - link[members[b]]).norm());
    c.dim = cluster_dimension(link, members, c.diameter);
    c.members = std::move(members);
    cone.clusters.push_back(std::move(c));
  }
  cone.cone_dim = 0;
  for (const auto& c : cone.clusters) cone.cone_dim = std::max(cone.cone_dim, c.dim + 1);
  return cone;
}

double initial_form_residual(const ConeEstimate& cone) {
  double worst = 0.0;
  const PointCloud& link = cone.link();
  const auto& pieces = cone.link_pieces.at(cone.finest);
  std::vector<std::vector<std::pair<NumericPolynomial, double>>> forms;
  for (const auto& fs : cone.initial_forms) {
    std::vector<std::pair<NumericPolynomial, double>> row;
    for (const auto& f : fs) {
      NumericPolynomial nf(f);
      row.emplace_back(nf, nf.coef_l1());
    }
    forms.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < link.size(); ++i) {
    for (const auto& [f, l1] : forms.at(pieces[i])) {
      worst = std::max(worst, std::abs(f.eval(link[i])) / l1);
    }
  }
  return worst;
}

double distance_to_link(const ConeEstimate& cone, const Vec& v) {
  if (cone.empty()) return std::numeric_limits<double>::infinity();
  Vec u = v.normalized();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : cone.link()) best = std::min(best, (p - u).norm());
  return best;
}

ConeTangent cone_tangent_at(const ConeEstimate& cone, const Vec& v_in,
                            std::optional<std::size_t> scale) {
  if (v_in.size() != cone.n) throw Error(ErrorKind::DimensionMismatch, "cone_tangent_at");
  if (v_in.norm() == 0.0) throw Error(ErrorKind::ZeroVector, "cone_tangent_at needs v != 0");
  const std::size_t k = scale.value_or(cone.finest);
  if (k >= cone.link_samples.size()) throw Error(ErrorKind::InvalidArgument, "scale index out of range");
  const PointCloud& cloud = cone.link_samples[k];
  const Vec v = v_in.normalized();

  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& u : cloud) nearest = std::min(nearest, (u - v).norm());
  if (!(nearest <= kLinkEps)) {
    throw Error(ErrorKind::NotOnCone, "direction is " + std::to_string(nearest) + " from the link");
  }

  ConeTangent out{v, Mat(cone.n, 0), line(v)};
  // dimension of the link component through v
  if (!cone.empty()) {
    const PointCloud& fine = cone.link();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : cone.clusters) {
      for (std::size_t i : c.members) {
        double d = (fine[i] - v).norm();
        if (d < best) {
          best = d;
          out.cluster_dim = c.dim;
        }
      }
    }
  }

  CapStats big = cap_stats(cloud, v, kTangentCap);
  if (big.count < static_cast<std::size_t>(kMinCapPoints)) {
    throw Error(ErrorKind::InsufficientDensity, "too few link directions near v");
  }
  const int m = cap_dimension(big);
  out.link_dim = m;
  out.link_basis = big.axes.leftCols(m);

  CapStats small = cap_stats(cloud, v, kSmallCap);
  bool side_big = one_sided(big, out.link_basis, kTangentCap);
  bool side_small = small.count >= static_cast<std::size_t>(kMinCapPoints)
                        ? one_sided(small, out.link_basis, kSmallCap)
                        : side_big;
  out.boundary = side_big && side_small;

  if (m > out.cluster_dim) {
    out.crease = true;  // several branches cross at v
  } else if (m >= 1) {
    CapStats tiny = cap_stats(cloud, v, kNoiseCap);
    double noise = quadratic_residual(tiny, v, out.link_basis);
    double res = quadratic_residual(big, v, out.link_basis);
    out.crease = (res - noise) / (kTangentCap * kTangentCap) > 0.1;
  }
  out.singular_flag = out.boundary || out.crease;

  bool aligned = true;
  if (m >= 1) {
    int total = 0, off = 0;
    for (Eigen::Index i = 0; i < big.offsets.cols(); ++i) {
      Vec t = big.offsets.col(i);
      double tn = t.norm();
      if (tn <= 0.25 * kTangentCap) continue;
      ++total;
      Vec inside = out.link_basis * (out.link_basis.transpose() * t);
      if ((t - inside).norm() / tn >= 0.2) ++off;
    }
    aligned = total > 0 && off <= total / 20;
  }
  out.cvc_is_d_plane = (m + 1 == cone.d) && !out.boundary && aligned;

  Mat frame(cone.n, m + 1);
  frame << out.link_basis, v;
  out.full_tangent = GrassPoint(frame);
  return out;
}

ConeEstimate estimate_singular_cone(const Scene& scene, const ConeOptions& opts) {
  std::vector<BasicPiece> locus =
      scene.singular_locus ? *scene.singular_locus : derive_singular_locus(scene);
  if (locus.empty()) {
    ConeEstimate empty;
    empty.n = scene.n;
    empty.d = scene.d;
    empty.stabilized = true;
    return empty;
  }
  Scene sing = make_scene(scene.name + "/singular", scene.n, scene.d, std::move(locus));
  ConeOptions o = opts;
  o.require_regular = false;
  if (o.count <= 0) o.count = std::max(200, default_count(scene.n) / 4);
  return estimate_cone(sing, o);
}

bool ray_in_cprime(const ConeEstimate& singular_cone, const Ray& ray) {
  return distance_to_link(singular_cone, ray.direction()) <= kLinkEps;
}

bool ray_in_cprime(const Scene& scene, const Ray& ray, const ConeOptions& opts) {
  return ray_in_cprime(estimate_singular_cone(scene, opts), ray);
}

}  // namespace nashfiber
