#include "nashfiber/fiber.hpp"

#include "nashfiber/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nashfiber {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// A piece seen with this many points in the full cap must keep them in the tight one.
constexpr int kPieceMin = 6;

// Largest eigenvalue of a symmetric 2x2 matrix.
double sym2_max_eig(double a, double b, double c) {
  const double m = 0.5 * (a + c);
  const double r = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  return m + r;
}

// angle_subspaces, with closed forms for hyperplanes and for k <= 2.
double plane_angle(const GrassPoint& a, const GrassPoint& b) {
  if (a.k() != b.k() || a.n() != b.n()) return angle_subspaces(a, b);
  if (a.complement().cols() == 1) {
    const auto na = a.complement().col(0);
    const auto nb = b.complement().col(0);
    const double c = na.dot(nb);
    double s2 = 0.0;
    for (Eigen::Index i = 0; i < na.size(); ++i) {
      const double t = na(i) - c * nb(i);
      s2 += t * t;
    }
    return std::atan2(std::sqrt(s2), std::abs(c));
  }
  if (a.k() == 2) {
    const Mat& u = a.basis();
    const Mat& v = b.basis();
    Eigen::Matrix2d m = u.transpose() * v;
    // sigma_min of the cross matrix, and sigma_max of the residual V - U M.
    const Eigen::Matrix2d mtm = m.transpose() * m;
    const double smin2 = std::max(0.0, mtm.trace() - sym2_max_eig(mtm(0, 0), mtm(0, 1), mtm(1, 1)));
    const Eigen::Matrix2d rtr = Eigen::Matrix2d::Identity() - mtm;
    const double smax2 = std::max(0.0, sym2_max_eig(rtr(0, 0), rtr(0, 1), rtr(1, 1)));
    return std::atan2(std::sqrt(smax2), std::sqrt(smin2));
  }
  return angle_subspaces(a, b);
}

// Largest distance from a plane of the set to its nearest other member.
double nearest_gap(const std::vector<GrassPoint>& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = kInf;
    for (std::size_t j = 0; j < a.size(); ++j)
      if (j != i) best = std::min(best, plane_angle(a[i], a[j]));
    if (std::isfinite(best)) worst = std::max(worst, best);
  }
  return worst;
}

double plane_hausdorff(const std::vector<GrassPoint>& a, const std::vector<GrassPoint>& b) {
  if (a.empty() || b.empty()) return kInf;
  auto directed = [](const std::vector<GrassPoint>& x, const std::vector<GrassPoint>& y) {
    double worst = 0.0;
    for (const auto& p : x) {
      double best = kInf;
      for (const auto& q : y) best = std::min(best, plane_angle(p, q));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

std::vector<std::vector<std::size_t>> plane_components(const std::vector<GrassPoint>& planes, double eps) {
  UnionFind uf(planes.size());
  for (std::size_t i = 0; i < planes.size(); ++i)
    for (std::size_t j = i + 1; j < planes.size(); ++j)
      if (uf.find(i) != uf.find(j) && plane_angle(planes[i], planes[j]) <= eps) uf.unite(i, j);
  std::vector<std::vector<std::size_t>> groups(planes.size());
  for (std::size_t i = 0; i < planes.size(); ++i) groups[uf.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& g : groups)
    if (!g.empty()) out.push_back(std::move(g));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
  });
  return out;
}

std::size_t medoid(const std::vector<GrassPoint>& planes) {
  std::size_t best = 0;
  double best_sum = kInf;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < planes.size() && s < best_sum; ++j) s += plane_angle(planes[i], planes[j]);
    if (s < best_sum) {
      best_sum = s;
      best = i;
    }
  }
  return best;
}

double diameter_of(const std::vector<GrassPoint>& planes) {
  double d = 0.0;
  for (std::size_t i = 0; i < planes.size(); ++i)
    for (std::size_t j = i + 1; j < planes.size(); ++j) d = std::max(d, plane_angle(planes[i], planes[j]));
  return d;
}

// Stabilized: consecutive distances shrink (up to eps/4 of sampling noise) and end below eps/2.
bool trace_stabilized(const std::vector<double>& trace, double eps) {
  if (trace.empty()) return false;
  for (double t : trace)
    if (!std::isfinite(t)) return false;
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] > trace[i - 1] + 0.25 * eps) return false;
  return trace.back() < 0.5 * eps;
}

// Span of the top k eigenvectors of the averaged orthogonal projectors.
GrassPoint extrinsic_mean(const std::vector<GrassPoint>& planes) {
  const auto n = planes.front().n();
  const auto k = planes.front().k();
  Mat acc = Mat::Zero(n, n);
  for (const auto& p : planes) acc += p.basis() * p.basis().transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(acc);
  return GrassPoint(es.eigenvectors().rightCols(k));
}

// Remaining movement of a compact cluster, from the geometric tail of the
// distances between the medoids of consecutive scales.
// Movements below 0.1 eps are at sampling resolution and count as settled.
double drift_tail(const std::vector<std::vector<GrassPoint>>& by_scale, double eps) {
  std::vector<GrassPoint> reps;
  for (const auto& s : by_scale)
    if (!s.empty()) reps.push_back(extrinsic_mean(s));
  if (reps.size() < 3) return kInf;
  const double prev = plane_angle(reps[reps.size() - 3], reps[reps.size() - 2]);
  const double last = plane_angle(reps[reps.size() - 2], reps.back());
  if (last < 0.1 * eps) return last;
  if (last >= prev) return kInf;
  const double q = last / prev;
  return last * q / (1.0 - q);
}

struct ScalePlanes {
  std::vector<GrassPoint> planes;
  double aperture = 0.0;
};

ScalePlanes select_planes(const ScaleSample& s, const Ray& ray, const FiberOptions& opts, bool tight,
                          std::size_t piece_count) {
  std::vector<double> offset(s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) offset[i] = conical_offset(s.points[i].x, ray);

  auto counts = [&](double a) {
    std::vector<int> c(piece_count + 1, 0);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (offset[i] <= a) {
        ++c[s.points[i].piece];
        ++c[piece_count];
      }
    }
    return c;
  };
  double a = s.delta;
  if (tight) {
    const auto full = counts(a);
    auto keeps = [&](const std::vector<int>& c) {
      if (c[piece_count] < opts.min_points) return false;
      for (std::size_t p = 0; p < piece_count; ++p)
        if (full[p] >= kPieceMin && c[p] < kPieceMin) return false;
      return true;
    };
    const double floor = std::min(s.delta, opts.aperture_floor * s.r);
    while (a > floor) {
      const double next = std::max(0.5 * a, floor);
      if (!keeps(counts(next))) break;
      a = next;
    }
  }
  ScalePlanes out;
  out.aperture = a;
  for (std::size_t i = 0; i < s.points.size(); ++i)
    if (offset[i] <= a && s.points[i].tangent) out.planes.push_back(s.points[i].tangent->plane);
  return out;
}

void cluster_window(FiberEstimate& f, const std::vector<std::size_t>& window, double eps) {
  std::vector<GrassPoint> pool;
  std::vector<std::size_t> origin;  // position in window
  for (std::size_t w = 0; w < window.size(); ++w) {
    for (const auto& p : f.per_scale_planes[window[w]]) {
      pool.push_back(p);
      origin.push_back(w);
    }
  }
  f.clusters.clear();
  f.dropped_minor = 0;
  const std::size_t last = window.size() - 1;
  const std::size_t finest_total = f.per_scale_planes[window[last]].size();
  const std::size_t minor = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(0.02 * finest_total)));

  for (const auto& comp : plane_components(pool, eps)) {
    std::vector<std::vector<GrassPoint>> by_scale(window.size());
    for (auto i : comp) by_scale[origin[i]].push_back(pool[i]);
    if (by_scale[last].size() < minor) {
      ++f.dropped_minor;
      continue;
    }
    FiberCluster c{by_scale[last][medoid(by_scale[last])], by_scale[last], 0.0, 0, false, {}, 0.0};
    c.diameter = diameter_of(c.members);
    std::vector<double> gap(window.size());
    for (std::size_t w = 0; w < window.size(); ++w) gap[w] = nearest_gap(by_scale[w]);
    std::vector<double> excess;
    for (std::size_t w = 1; w < window.size(); ++w) {
      const double h = plane_hausdorff(by_scale[w - 1], by_scale[w]);
      c.trace.push_back(h);
      excess.push_back(std::max(0.0, h - std::max(gap[w - 1], gap[w])));
    }
    c.stabilized = trace_stabilized(excess, eps);
    if (c.diameter <= 3.0 * eps) c.drift_tail = drift_tail(by_scale, eps);
    c.dim_estimate = plane_set_dimension(c.members, eps);
    f.clusters.push_back(std::move(c));
  }
  // Compact clusters that are still drifting may merge in the limit.
  for (std::size_t i = 0; i < f.clusters.size(); ++i) {
    for (std::size_t j = i + 1; j < f.clusters.size(); ++j) {
      auto& a = f.clusters[i];
      auto& b = f.clusters[j];
      if (plane_angle(a.representative, b.representative) <= eps + a.drift_tail + b.drift_tail) {
        a.stabilized = false;
        b.stabilized = false;
      }
    }
  }
  for (auto& c : f.clusters)
    if (c.drift_tail >= 0.5 * eps) c.stabilized = false;
  f.stabilized = !f.clusters.empty() &&
                 std::all_of(f.clusters.begin(), f.clusters.end(), [](const auto& c) { return c.stabilized; });
}

}  // namespace

double FiberEstimate::diameter() const {
  double d = 0.0;
  for (const auto& c : clusters) d = std::max(d, c.diameter);
  return d;
}

bool FiberEstimate::multi(double eps_g) const {
  return clusters.size() >= 2 || diameter() > 3.0 * eps_g;
}

Mat grassmann_log(const GrassPoint& p, const GrassPoint& q) {
  if (p.n() != q.n() || p.k() != q.k()) throw Error(ErrorKind::DimensionMismatch, "grassmann_log: shape mismatch");
  const Mat& u = p.basis();
  const Mat& y = q.basis();
  const Mat m = u.transpose() * y;
  Eigen::JacobiSVD<Mat> msvd(m);
  if (msvd.singularValues().minCoeff() < 1e-6) throw Error(ErrorKind::InvalidArgument, "grassmann_log: cut locus");
  const Mat delta = (y - u * m) * m.inverse();
  Eigen::JacobiSVD<Mat> svd(delta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vec s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::atan(s(i));
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

int plane_set_dimension(const std::vector<GrassPoint>& planes, double eps_g) {
  if (planes.size() < 3 || diameter_of(planes) <= 3.0 * eps_g) return 0;
  const GrassPoint& center = planes[medoid(planes)];
  const auto n = center.n();
  const auto k = center.k();
  Mat second = Mat::Zero(n * k, n * k);
  int used = 0;
  for (const auto& q : planes) {
    if (plane_angle(center, q) > 0.25 * M_PI) continue;
    const Mat l = grassmann_log(center, q);
    const Vec flat = Eigen::Map<const Vec>(l.data(), l.size());
    second += flat * flat.transpose();
    ++used;
  }
  if (used < 3) return 0;
  second /= used;
  Eigen::SelfAdjointEigenSolver<Mat> es(second);
  const Vec ev = es.eigenvalues().reverse();
  if (std::sqrt(std::max(ev(0), 0.0)) < 0.5 * eps_g) return 0;
  int dim = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) >= 0.1 * ev(0)) ++dim;
  return dim;
}

FiberEstimate estimate_fiber(const Scene& scene, const Ray& ray, const FiberOptions& opts, const ConeEstimate* cone) {
  if (ray.dim() != scene.n) throw Error(ErrorKind::DimensionMismatch, "ray dimension differs from the scene");
  if (opts.window < 2) throw Error(ErrorKind::InvalidArgument, "fiber window must be at least 2");
  if (cone && distance_to_link(*cone, ray.direction()) > 2.0 * kLinkEps) {
    throw Error(ErrorKind::RayNotInCone, "ray is far from the estimated tangent cone");
  }
  std::vector<ScaleSample> samples;
  try {
    samples = run_schedule(scene, ray, opts.schedule, SampleOptions{true, opts.jobs});
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::AllScalesEmpty) throw Error(ErrorKind::RayNotInCone, e.what());
    throw;
  }

  FiberEstimate f;
  f.ray = ray.direction();
  auto fill = [&](bool tight) {
    f.scales.clear();
    f.radii.clear();
    f.apertures.clear();
    f.per_scale_planes.clear();
    for (const auto& s : samples) {
      auto sp = select_planes(s, ray, opts, tight, scene.pieces.size());
      f.scales.push_back(s.k);
      f.radii.push_back(s.r);
      f.apertures.push_back(sp.aperture);
      f.per_scale_planes.push_back(std::move(sp.planes));
    }
  };
  fill(true);

  // The finest `window` scales that carry planes.
  std::vector<std::size_t> window;
  for (std::size_t i = f.per_scale_planes.size(); i-- > 0 && window.size() < static_cast<std::size_t>(opts.window);) {
    if (!f.per_scale_planes[i].empty()) window.insert(window.begin(), i);
  }
  if (window.empty()) throw Error(ErrorKind::RayNotInCone, "no regular points near the ray");
  if (window.size() < 2) {
    throw Error(ErrorKind::NotStabilized, "fewer than two scales carry planes near the ray");
  }

  cluster_window(f, window, opts.eps_g);
  if (opts.widen && f.stabilized && f.multi(opts.eps_g)) {
    for (auto w : window) {
      auto& s = samples[w];
      const int k = s.k;
      try {
        s = sample_sphere_slice(scene, ray, s.r, s.delta, opts.schedule.samples_per_scale * opts.widen_oversample,
                                opts.schedule.seed ^ static_cast<std::uint64_t>(s.k), SampleOptions{true, opts.jobs});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptySlice) throw;
      }
      s.k = k;
    }
    fill(false);
    cluster_window(f, window, opts.eps_g);
    f.widened = true;
  }
  return f;
}

std::vector<FiberComponent> fiber_connectivity(const FiberEstimate& fiber, double eps_g) {
  std::vector<GrassPoint> planes;
  for (const auto& c : fiber.clusters) planes.insert(planes.end(), c.members.begin(), c.members.end());
  std::vector<FiberComponent> out;
  for (const auto& comp : plane_components(planes, eps_g)) {
    FiberComponent fc;
    for (auto i : comp) fc.planes.push_back(planes[i]);
    fc.dim_estimate = plane_set_dimension(fc.planes, eps_g);
    out.push_back(std::move(fc));
  }
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::ordinary: return "ordinary";
    case Verdict::exceptional_b: return "exceptional_b";
    case Verdict::in_Eprime: return "in_Eprime";
    case Verdict::singular_cone_ray: return "singular_cone_ray";
    case Verdict::in_Cprime: return "in_Cprime";
    case Verdict::not_in_cone: return "not_in_cone";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Analyzer::Analyzer(Scene scene, ClassifyOptions opts) : scene_(std::move(scene)), opts_(std::move(opts)) {
  opts_.cone.schedule = opts_.fiber.schedule;
  cone_ = estimate_cone(scene_, opts_.cone);
  singular_ = estimate_singular_cone(scene_, opts_.cone);
}

FiberEstimate Analyzer::fiber(const Ray& ray) const { return estimate_fiber(scene_, ray, opts_.fiber, &cone_); }

RayClassification Analyzer::classify(const Ray& ray) const {
  RayClassification rc;
  rc.ray = ray.direction();
  rc.eps_g = opts_.fiber.eps_g;
  const double eps = opts_.fiber.eps_g;
  auto& ev = rc.evidence;

  ev.cone_distance = distance_to_link(cone_, ray.direction());
  if (ev.cone_distance > opts_.cone_gate) {
    rc.verdict = Verdict::not_in_cone;
    return rc;
  }
  ev.in_cprime = ray_in_cprime(singular_, ray);

  std::optional<ConeTangent> tan;
  try {
    tan = cone_tangent_at(cone_, ray.direction());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotOnCone && e.kind() != ErrorKind::InsufficientDensity) throw;
    rc.note = std::string("cone tangent unavailable: ") + e.what();
  }
  ev.cvc_is_d_plane = tan && tan->cvc_is_d_plane;
  ev.singular_flag = !tan || tan->singular_flag || !tan->cvc_is_d_plane;
  ev.predicted_exceptional = tan && !tan->cvc_is_d_plane;
  ev.tvc_dim = tan ? static_cast<int>(tan->full_tangent.k()) : 0;

  try {
    rc.fiber = fiber(ray);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::RayNotInCone) {
      rc.verdict = Verdict::not_in_cone;
      rc.note = e.what();
      return rc;
    }
    if (e.kind() != ErrorKind::NotStabilized) throw;
    rc.verdict = ev.in_cprime ? Verdict::in_Cprime : Verdict::inconclusive;
    rc.note = e.what();
    return rc;
  }
  const FiberEstimate& f = *rc.fiber;
  ev.cluster_count = static_cast<int>(f.clusters.size());
  ev.fiber_diameter = f.diameter();
  ev.stabilized = f.stabilized;

  if (tan && !f.clusters.empty()) {
    ev.distance_to_TvC = kInf;
    double worst = 0.0;
    for (const auto& c : f.clusters) {
      const double a = angle_subspaces(tan->full_tangent, c.representative);
      ev.distance_to_TvC = std::min(ev.distance_to_TvC, a);
      worst = std::max(worst, a);
    }
    ev.contains_TvC_min_angle = ev.distance_to_TvC;
    if (!ev.singular_flag) ev.eprime = worst > 3.0 * eps;
  }

  if (ev.in_cprime) {
    rc.verdict = Verdict::in_Cprime;
  } else if (!f.stabilized) {
    rc.verdict = Verdict::inconclusive;
  } else if (f.multi(eps)) {
    rc.verdict = Verdict::exceptional_b;
  } else if (ev.singular_flag) {
    rc.verdict = Verdict::singular_cone_ray;
  } else if (f.clusters.size() == 1 && ev.distance_to_TvC < eps && ev.tvc_dim == scene_.d) {
    rc.verdict = Verdict::ordinary;
  } else if (ev.eprime.value_or(false)) {
    rc.verdict = Verdict::in_Eprime;
  } else {
    rc.verdict = Verdict::inconclusive;
  }
  return rc;
}

std::vector<RayClassification> Analyzer::classify_all(const std::vector<Ray>& rays, int jobs) const {
  std::vector<RayClassification> out(rays.size());
  parallel_for(rays.size(), jobs, [&](std::size_t i) { out[i] = classify(rays[i]); });
  return out;
}

RayClassification classify_ray(const Scene& scene, const Ray& ray, const ClassifyOptions& opts) {
  return Analyzer(scene, opts).classify(ray);
}

ClosureReport fiber_closure_check(const Analyzer& analyzer, const Ray& ray, int m) {
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "closure check needs at least one perturbation");
  const double eps = analyzer.options().fiber.eps_g;
  const Vec& v = ray.direction();
  const FiberEstimate base = analyzer.fiber(ray);
  std::vector<GrassPoint> fiber_planes;
  for (const auto& c : base.clusters) fiber_planes.insert(fiber_planes.end(), c.members.begin(), c.members.end());

  ClosureReport rep;
  Mat dirs;
  try {
    dirs = cone_tangent_at(analyzer.cone(), v).link_basis;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotOnCone && e.kind() != ErrorKind::InsufficientDensity) throw;
  }
  auto distance_to_fiber = [&](const GrassPoint& p) {
    double best = kInf;
    for (const auto& q : fiber_planes) best = std::min(best, angle_subspaces(p, q));
    return best;
  };

  // Accumulation is judged on the finer half of the tilts.
  const int first_tail = (m + 1) / 2;
  bool any_tvc = false;
  for (Eigen::Index c = 0; c < dirs.cols(); ++c) {
    for (double sign : {1.0, -1.0}) {
      std::optional<GrassPoint> last_tvc;
      for (int j = 1; j <= m; ++j) {
        const double t = std::ldexp(1.0, -j);
        const Vec vj = (std::cos(t) * v + std::sin(t) * sign * dirs.col(c)).normalized();
        if (distance_to_link(analyzer.cone(), vj) > kLinkEps) continue;
        if (ray_in_cprime(analyzer.singular_cone(), Ray(vj))) continue;
        FiberEstimate fj;
        try {
          fj = analyzer.fiber(Ray(vj));
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::RayNotInCone || e.kind() == ErrorKind::NotStabilized) continue;
          throw;
        }
        ++rep.neighbors;
        if (j >= first_tail) {
          for (const auto& cl : fj.clusters) rep.worst_distance = std::max(rep.worst_distance, distance_to_fiber(cl.representative));
        }
        try {
          const ConeTangent tj = cone_tangent_at(analyzer.cone(), vj);
          if (!tj.singular_flag && tj.cvc_is_d_plane) last_tvc = tj.full_tangent;
        } catch (const Error&) {
        }
      }
      if (last_tvc) {
        any_tvc = true;
        double best = kInf;
        for (const auto& q : fiber_planes) best = std::min(best, angle_subspaces(*last_tvc, q));
        rep.tvc_containment = std::max(rep.tvc_containment, best);
      }
    }
  }
  if (rep.neighbors == 0) {
    rep.vacuous = true;
    rep.pass = true;
    rep.note = "no admissible neighbors";
    return rep;
  }
  rep.pass = rep.worst_distance <= 2.0 * eps && (!any_tvc || rep.tvc_containment <= 2.0 * eps);
  return rep;
}

}  // namespace nashfiber
