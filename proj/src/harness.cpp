#include "nashfiber/harness.hpp"

#include "nashfiber/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace nashfiber {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_hypersurfaces(const Scene& scene) {
  if (scene.n < 2 || scene.d != scene.n - 1) {
    throw Error(ErrorKind::InvalidArgument, "gradient bound needs hypersurface pieces");
  }
}

std::vector<Vec> patch_points(const Scene& scene, const Patch& patch, int pool, std::uint64_t seed, int jobs) {
  if (patch.piece >= scene.pieces.size()) throw Error(ErrorKind::InvalidArgument, "patch piece out of range");
  if (patch.center.size() != scene.n) throw Error(ErrorKind::DimensionMismatch, "patch center");
  SampleOptions so;
  so.jobs = jobs;
  std::vector<SamplePoint> pts;
  try {
    pts = sample_ball(scene, patch.center, patch.radius, 2 * pool, seed, so);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyPatch) throw;
  }
  std::vector<Vec> out;
  for (auto& p : pts) {
    if (p.piece == patch.piece && static_cast<int>(out.size()) < pool) out.push_back(std::move(p.x));
  }
  if (out.empty()) {
    throw Error(ErrorKind::EmptyPatch, "no regular point of piece " + std::to_string(patch.piece) + " in the patch");
  }
  return out;
}

GrassPoint regular_tangent(const Scene& scene, std::size_t piece, const Vec& x) {
  std::optional<TangentSpaceResult> t;
  try {
    t = tangent_space_at(scene, piece, x);
  } catch (const Error& e) {
    throw Error(ErrorKind::SingularSample, std::string("sample is not regular: ") + e.what());
  }
  if (!t->regular) throw Error(ErrorKind::SingularSample, "sample lies on a boundary");
  return t->plane;
}

}  // namespace

// ---------------------------------------------------------------- gradient bound

GradientBoundSample gradient_bound_sample(const Vec& y, const GrassPoint& ty, const Vec& z,
                                          const GrassPoint& tz, double fd_step) {
  const Vec chord = y - z;
  const double rho = chord.norm();
  if (!(rho > 0.0)) throw Error(ErrorKind::InvalidArgument, "y and z coincide");
  GradientBoundSample s;
  s.y = y;
  s.z = z;
  s.u = chord / rho;
  const Vec ay = ty.basis().transpose() * s.u;
  const Vec az = -(tz.basis().transpose() * s.u);
  s.restricted_gradient_norm = std::sqrt(ay.squaredNorm() + az.squaredNorm());
  s.tangent_angle = angle_subspaces(ty, tz);
  s.margin = s.restricted_gradient_norm - std::sin(s.tangent_angle) / std::numbers::sqrt2;

  const double h = fd_step;
  double err = 0.0;
  for (Eigen::Index i = 0; i < ty.k(); ++i) {
    const Vec a = ty.basis().col(i);
    const double fd = ((y + h * a - z).norm() - (y - h * a - z).norm()) / (2 * h);
    err = std::max(err, std::abs(fd - ay[i]));
  }
  for (Eigen::Index i = 0; i < tz.k(); ++i) {
    const Vec b = tz.basis().col(i);
    const double fd = ((y - z - h * b).norm() - (y - z + h * b).norm()) / (2 * h);
    err = std::max(err, std::abs(fd - az[i]));
  }
  s.fd_error = err;
  return s;
}

GradientBoundSample gradient_bound_sample(const Scene& scene, std::size_t piece_y, const Vec& y,
                                          std::size_t piece_z, const Vec& z) {
  require_hypersurfaces(scene);
  return gradient_bound_sample(y, regular_tangent(scene, piece_y, y), z, regular_tangent(scene, piece_z, z));
}

GradientBoundReport check_gradient_bound(const Scene& scene, const Patch& py, const Patch& pz,
                                         const GradientBoundOptions& opts) {
  require_hypersurfaces(scene);
  if (opts.count < 1 || opts.pool < 1) throw Error(ErrorKind::InvalidArgument, "count and pool must be positive");
  const std::vector<Vec> ys = patch_points(scene, py, opts.pool, derive_seed(opts.seed, 11, 0), opts.jobs);
  const std::vector<Vec> zs = patch_points(scene, pz, opts.pool, derive_seed(opts.seed, 11, 1), opts.jobs);
  std::vector<GrassPoint> ty, tz;
  for (const auto& y : ys) ty.push_back(regular_tangent(scene, py.piece, y));
  for (const auto& z : zs) tz.push_back(regular_tangent(scene, pz.piece, z));

  // Pair indices are drawn up front so that the result does not depend on jobs.
  std::mt19937_64 rng(derive_seed(opts.seed, 12, 0));
  std::uniform_int_distribution<std::size_t> iy(0, ys.size() - 1), iz(0, zs.size() - 1);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(static_cast<std::size_t>(opts.count));
  while (pairs.size() < static_cast<std::size_t>(opts.count)) {
    const std::size_t a = iy(rng), b = iz(rng);
    if ((ys[a] - zs[b]).norm() > 1e-9) pairs.emplace_back(a, b);
    else if (ys.size() == 1 && zs.size() == 1) throw Error(ErrorKind::InvalidArgument, "patches share their only point");
  }
  std::vector<GradientBoundSample> samples(pairs.size());
  parallel_for(pairs.size(), opts.jobs, [&](std::size_t i) {
    const auto [a, b] = pairs[i];
    samples[i] = gradient_bound_sample(ys[a], ty[a], zs[b], tz[b]);
  });

  GradientBoundReport rep;
  rep.pairs = static_cast<int>(samples.size());
  rep.pool_y = static_cast<int>(ys.size());
  rep.pool_z = static_cast<int>(zs.size());
  rep.min_margin = kInf;
  for (const auto& s : samples) {
    if (s.margin < rep.min_margin) {
      rep.min_margin = s.margin;
      rep.worst = s;
    }
    rep.max_norm = std::max(rep.max_norm, s.restricted_gradient_norm);
    rep.max_fd_error = std::max(rep.max_fd_error, s.fd_error);
  }
  rep.pass = rep.min_margin >= -opts.margin_tol && rep.max_norm <= std::numbers::sqrt2 + 1e-9 &&
             rep.max_fd_error <= opts.fd_tol;
  return rep;
}

// ---------------------------------------------------------------- nearest point

NearestPoint nearest_point(const Scene& scene, const Vec& q, std::optional<double> search_radius, int count,
                           std::uint64_t seed) {
  if (q.size() != scene.n) throw Error(ErrorKind::DimensionMismatch, "nearest_point");
  struct Candidate {
    Vec x;
    std::size_t piece;
    double dist;
  };
  std::vector<Candidate> cands;
  auto add = [&](const Vec& x, std::size_t piece) { cands.push_back({x, piece, (x - q).norm()}); };

  if (scene.origin_on_set) {
    for (std::size_t p = 0; p < scene.pieces.size(); ++p) {
      if (satisfies(scene.pieces[p], Vec::Zero(scene.n), kSignTol)) add(Vec::Zero(scene.n), p);
    }
  }
  for (std::size_t p = 0; p < scene.pieces.size(); ++p) {
    try {
      add(newton_project(scene.pieces[p], q), p);
    } catch (const Error&) {
    }
  }
  double radius = search_radius ? *search_radius : q.norm();
  if (!cands.empty()) {
    double best = kInf;
    for (const auto& c : cands) best = std::min(best, c.dist);
    radius = std::min(radius, 1.05 * best);
  }
  if (radius > 0.0) {
    SampleOptions so;
    so.require_regular = false;
    try {
      for (auto& s : sample_ball(scene, q, radius, count, seed, so)) add(s.x, s.piece);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyPatch) throw;
    }
  }
  if (cands.empty()) throw Error(ErrorKind::EmptyPatch, "no point of the scene near the query");
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.dist < b.dist; });
  if (cands.size() > 6) cands.resize(6);

  // Foot-point iteration: move along the tangent space toward q, re-project.
  for (auto& c : cands) {
    if (c.x.norm() == 0.0) continue;
    for (int it = 0; it < 60; ++it) {
      std::optional<GrassPoint> t;
      try {
        t = tangent_space_at(scene, c.piece, c.x).plane;
      } catch (const Error&) {
        break;
      }
      Vec step = t->project(q - c.x);
      if (step.norm() <= 1e-14 * std::max(1.0, q.norm())) break;
      bool moved = false;
      for (int half = 0; half < 30 && !moved; ++half, step *= 0.5) {
        try {
          Vec x = newton_project(scene.pieces[c.piece], c.x + step);
          const double d = (x - q).norm();
          if (d < c.dist) {
            c.x = x;
            c.dist = d;
            moved = true;
          }
        } catch (const Error&) {
        }
      }
      if (!moved) break;
    }
  }
  const auto best = std::min_element(cands.begin(), cands.end(),
                                     [](const Candidate& a, const Candidate& b) { return a.dist < b.dist; });
  NearestPoint out{best->x, best->piece, best->dist, std::nullopt};
  if (out.x.norm() > 0.0) {
    try {
      TangentSpaceResult t = tangent_space_at(scene, out.piece, out.x);
      if (t.regular) out.tangent = t.plane;
    } catch (const Error&) {
    }
  }
  return out;
}

// ---------------------------------------------------------------- two-sided bounds

Scene translate_scene(const Scene& scene, const Vec& v) {
  if (v.size() != scene.n) throw Error(ErrorKind::DimensionMismatch, "translate_scene");
  std::vector<Polynomial> shifted;
  for (int i = 0; i < scene.n; ++i) {
    shifted.push_back(Polynomial::variable(scene.n, i) + Polynomial::constant(scene.n, Rational(v[i])));
  }
  auto tr = [&](const Polynomial& f) {
    Polynomial out(scene.n);
    for (const auto& [e, c] : f.terms()) {
      Polynomial term = Polynomial::constant(scene.n, c);
      for (int i = 0; i < scene.n; ++i) {
        if (e[i] > 0) term = term * shifted[i].pow(static_cast<unsigned>(e[i]));
      }
      out = out + term;
    }
    return out;
  };
  auto tr_all = [&](const std::vector<Polynomial>& fs) {
    std::vector<Polynomial> out;
    for (const auto& f : fs) out.push_back(tr(f));
    return out;
  };
  auto tr_piece = [&](const BasicPiece& p) {
    return BasicPiece(scene.n, tr_all(p.equations()), tr_all(p.weak()), tr_all(p.strict()), tr_all(p.exclusions()));
  };
  std::vector<BasicPiece> pieces;
  for (const auto& p : scene.pieces) pieces.push_back(tr_piece(p));
  std::optional<std::vector<BasicPiece>> sing;
  if (scene.singular_locus) {
    sing.emplace();
    for (const auto& p : *scene.singular_locus) sing->push_back(tr_piece(p));
  }
  return make_scene(scene.name, scene.n, scene.d, std::move(pieces), std::move(sing));
}

TwoSidedReport check_two_sided_bounds(const Scene& scene, const Vec& v, const Vec& p_in, double R,
                                      const TwoSidedOptions& opts) {
  if (v.size() != scene.n || p_in.size() != scene.n) throw Error(ErrorKind::DimensionMismatch, "two-sided bounds");
  if (!(R > 0.0)) throw Error(ErrorKind::InvalidArgument, "R must be positive");
  const Vec p = Ray(p_in).direction();
  const Scene y = v.norm() == 0.0 ? scene : translate_scene(scene, v);
  if (!y.origin_on_set) throw Error(ErrorKind::InvalidArgument, "v is not a point of the set");
  const ConeEstimate cone = estimate_cone(y, opts.cone);

  TwoSidedReport rep;
  rep.R = R;
  double theta = std::numbers::pi / 2;
  for (const auto& w : cone.link()) theta = std::min(theta, angle_vectors(p, w));
  rep.theta = theta;
  if (theta < kLinkEps) throw Error(ErrorKind::RayInCone, "the direction lies in the tangent cone");

  std::vector<double> ts = opts.t_grid;
  if (ts.empty()) {
    for (int i = 2; i <= 60; ++i) ts.push_back(std::exp2(-i / 4.0));
  }
  std::sort(ts.begin(), ts.end(), std::greater<>());
  rep.grid.resize(ts.size());
  const double s = std::sin(theta);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    const NearestPoint np = nearest_point(y, t * p, std::nullopt, opts.nearest_count, derive_seed(0x2515, 3, i));
    TwoSidedEntry& e = rep.grid[i];
    e.t = t;
    e.distance = np.distance;
    e.lower = t * (s - 1.0 / R);
    e.upper = t * (s + 1.0 / R);
    e.holds = e.lower < e.distance && e.distance < e.upper;
  }
  // Largest dyadic delta <= 1/R such that every grid t below it holds.
  for (int m = 0; m < 60; ++m) {
    const double delta = std::exp2(-m);
    if (delta > 1.0 / R) continue;
    bool any = false, all = true;
    for (const auto& e : rep.grid) {
      if (e.t < delta) {
        any = true;
        all = all && e.holds;
      }
    }
    if (!any) break;
    if (all) {
      rep.delta_R = delta;
      break;
    }
  }
  rep.pass = rep.delta_R > 0.0;
  return rep;
}

// ---------------------------------------------------------------- flow

std::string to_string(FlowTermination t) {
  switch (t) {
    case FlowTermination::critical_point: return "critical_point";
    case FlowTermination::contact: return "contact";
    case FlowTermination::patch_exit: return "patch_exit";
    case FlowTermination::step_limit: return "step_limit";
  }
  return "unknown";
}

bool FlowTrace::strictly_decreasing() const {
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (!(steps[i].rho < steps[i - 1].rho)) return false;
  }
  return true;
}

double FlowTrace::decrease_error() const {
  double worst = 0.0, sum = 0.0;
  for (std::size_t i = 1; i < steps.size(); ++i) {
    sum += steps[i].h;
    const double actual = steps.front().rho - steps[i].rho;
    if (sum > 0.0) worst = std::max(worst, std::abs(actual - sum) / sum);
  }
  return worst;
}

namespace {

struct FlowState {
  Vec y, z;
  double rho = 0.0;
  Vec gy, gz;  // restricted gradient components
  double gnorm = 0.0;
  std::optional<GrassPoint> ty, tz;
};

FlowState flow_state(const Scene& scene, std::size_t py, std::size_t pz, const Vec& y, const Vec& z) {
  FlowState st;
  st.y = y;
  st.z = z;
  st.rho = (y - z).norm();
  try {
    st.ty = tangent_space_at(scene, py, y).plane;
    st.tz = tangent_space_at(scene, pz, z).plane;
  } catch (const Error& e) {
    throw Error(ErrorKind::ProjectionLoss, std::string("tangent space lost during the flow: ") + e.what());
  }
  if (st.rho > 0.0) {
    const Vec u = (y - z) / st.rho;
    st.gy = st.ty->project(u);
    st.gz = -st.tz->project(u);
  } else {
    st.gy = Vec::Zero(y.size());
    st.gz = Vec::Zero(z.size());
  }
  st.gnorm = std::sqrt(st.gy.squaredNorm() + st.gz.squaredNorm());
  return st;
}

}  // namespace

FlowTrace flow_between_sheets(const Scene& scene, std::size_t piece_y, std::size_t piece_z, const Vec& y0,
                              const Vec& z0, const Ball& ball, const FlowOptions& opts) {
  if (piece_y >= scene.pieces.size() || piece_z >= scene.pieces.size()) {
    throw Error(ErrorKind::InvalidArgument, "piece index out of range");
  }
  if (y0.size() != scene.n || z0.size() != scene.n || ball.center.size() != scene.n) {
    throw Error(ErrorKind::DimensionMismatch, "flow_between_sheets");
  }
  if (!(ball.radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "ball radius must be positive");
  auto inside = [&](const Vec& x) { return (x - ball.center).norm() < ball.radius; };
  if (!inside(y0) || !inside(z0)) throw Error(ErrorKind::InvalidArgument, "start pair outside the ball");

  FlowState st;
  try {
    st = flow_state(scene, piece_y, piece_z, newton_project(scene.pieces[piece_y], y0),
                    newton_project(scene.pieces[piece_z], z0));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ProjectionLoss) throw;
    throw Error(ErrorKind::ProjectionLoss, std::string("start pair is not on the pieces: ") + e.what());
  }

  FlowTrace tr;
  tr.steps.push_back({st.y, st.z, st.rho, 0.0, st.gnorm});
  tr.min_grad_norm = st.gnorm;
  const double max_move = 0.1 * ball.radius;
  double eta = max_move;
  for (;;) {
    if (st.rho < opts.contact_tol * ball.radius) {
      tr.termination = FlowTermination::contact;
      break;
    }
    if (st.gnorm < opts.critical_grad) {
      tr.termination = FlowTermination::critical_point;
      break;
    }
    if (static_cast<int>(tr.steps.size()) > opts.max_steps) {
      tr.termination = FlowTermination::step_limit;
      break;
    }
    // Displacement eta * |grad| stays below a quarter of rho so that the chord
    // direction turns little within one step.
    eta = std::min({1.5 * eta, max_move / st.gnorm, 0.25 * st.rho / st.gnorm});
    // Each point takes the largest of eta, eta/2, ... that keeps it on its
    // piece; a point at the edge of its piece's sign conditions stays put.
    bool lost = false;
    auto move = [&](std::size_t piece, const Vec& x, const Vec& g, double e) -> std::pair<Vec, double> {
      if (g.norm() == 0.0) return {x, 0.0};
      for (int i = 0; i < 12; ++i, e *= 0.5) {
        try {
          Vec moved = newton_project(scene.pieces[piece], x - e * g);
          tangent_space_at(scene, piece, moved);
          return {moved, e};
        } catch (const Error& err) {
          if (err.kind() == ErrorKind::NoConvergence) lost = true;
        }
      }
      return {x, 0.0};
    };
    bool accepted = false, exited = false;
    std::optional<FlowState> next;
    double h = 0.0;
    for (int tries = 0; tries < 60 && !exited; ++tries, eta *= 0.5) {
      lost = false;
      const auto [y, ey] = move(piece_y, st.y, st.gy, eta);
      const auto [z, ez] = move(piece_z, st.z, st.gz, eta);
      if (ey == 0.0 && ez == 0.0) {
        if (lost) throw Error(ErrorKind::ProjectionLoss, "Newton re-projection failed during the flow");
        exited = true;
        break;
      }
      h = ey * st.gy.squaredNorm() + ez * st.gz.squaredNorm();
      const double dec = st.rho - (y - z).norm();
      if (!(dec > 0.0) || std::abs(dec - h) > opts.step_accuracy * h) continue;
      if (!inside(y) || !inside(z)) {
        exited = true;
        break;
      }
      next = flow_state(scene, piece_y, piece_z, y, z);
      accepted = true;
      break;
    }
    if (!accepted) {
      tr.termination = exited ? FlowTermination::patch_exit : FlowTermination::step_limit;
      break;
    }
    tr.arc_length += std::sqrt((next->y - st.y).squaredNorm() + (next->z - st.z).squaredNorm());
    st = std::move(*next);
    tr.steps.push_back({st.y, st.z, st.rho, h, st.gnorm});
    tr.min_grad_norm = std::min(tr.min_grad_norm, st.gnorm);
  }
  tr.terminal_angle = angle_subspaces(*st.ty, *st.tz);
  return tr;
}

// ---------------------------------------------------------------- perpendicular limit

PerpendicularReport check_perpendicular_limit(const Scene& scene, const ConeEstimate& cone, const Ray& ray,
                                              const GrassPoint& q, const PerpendicularOptions& opts) {
  if (ray.dim() != scene.n || q.n() != scene.n) throw Error(ErrorKind::DimensionMismatch, "perpendicular limit");
  const Vec v = ray.direction();
  const ConeTangent ct = cone_tangent_at(cone, v);
  const GrassPoint& c = ct.full_tangent;

  PerpendicularReport rep;
  const Mat residual = (Mat::Identity(scene.n, scene.n) - c.projector()) * q.basis();
  Eigen::JacobiSVD<Mat> svd(residual, Eigen::ComputeThinV);
  const double sigma = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
  rep.theta = std::asin(std::min(1.0, sigma));
  if (rep.theta < 2 * kEpsG) throw Error(ErrorKind::HypothesisFailed, "Q has no ray outside the cone tangent");
  rep.p = (q.basis() * svd.matrixV().col(0)).normalized();
  rep.containment = c.k() <= q.k() ? angle_subspaces(c, q) : std::numbers::pi / 2;

  const ScaleSchedule& s = opts.schedule;
  for (int k = 1; k <= s.K; ++k) {
    const double r = s.radius(k);
    const double t = s.aperture(k) / 3.0;
    const Vec target = r * (v + t * rep.p);
    NearestPoint np;
    try {
      np = nearest_point(scene, target, 2.0 * r * t, opts.nearest_count, derive_seed(s.seed, 21, k));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::EmptyPatch) continue;
      throw;
    }
    if (!np.tangent) continue;
    rep.scales.push_back({k, r, t, np.x / r, *np.tangent, angle_subspaces(*np.tangent, q)});
  }
  if (rep.scales.empty()) throw Error(ErrorKind::AllScalesEmpty, "no regular nearest point at any scale");
  rep.limit = rep.scales.back().plane;
  rep.angle = rep.scales.back().angle_to_q;
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, opts.window)), rep.scales.size());
  rep.pass = true;
  for (std::size_t i = rep.scales.size() - w; i < rep.scales.size(); ++i) {
    if (std::abs(rep.scales[i].angle_to_q - std::numbers::pi / 2) >= opts.tol) rep.pass = false;
  }
  return rep;
}

}  // namespace nashfiber
