#include "nashfiber/harness.hpp"

#include "nashfiber/error.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <numbers>
#include <random>

namespace nashfiber {

namespace {

constexpr double kPi = std::numbers::pi;

GrassPoint hyperplane(const Vec& normal) { return GrassPoint::orthogonal_complement_of(normal); }

Vec unit(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v.normalized();
}

Vec axis(int i, int n) {
  Vec v = Vec::Zero(n);
  v[i] = 1.0;
  return v;
}

Json vec_json(const Vec& v) { return to_json(v); }

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Scene inline_scene(const std::string& text) { return scene_from_json(Json::parse(text)); }

std::vector<GrassPoint> finest_members(const FiberEstimate& f) {
  std::vector<GrassPoint> out;
  for (const auto& c : f.clusters) out.insert(out.end(), c.members.begin(), c.members.end());
  return out;
}

double max_angle_to(const std::vector<GrassPoint>& planes, const GrassPoint& target) {
  double worst = 0.0;
  for (const auto& p : planes) worst = std::max(worst, angle_subspaces(p, target));
  return worst;
}

double max_ray_offset(const std::vector<GrassPoint>& planes, const Vec& v) {
  double worst = 0.0;
  for (const auto& p : planes) worst = std::max(worst, angle_vector_subspace(v, p));
  return worst;
}

// Planes containing the line orthogonal to a and b: normals cos(phi) a + sin(phi) b.
std::vector<GrassPoint> axis_pencil(const Vec& a, const Vec& b, double sweep, int count) {
  std::vector<GrassPoint> out;
  for (int i = 0; i < count; ++i) {
    const double phi = sweep * i / (count - 1);
    out.push_back(hyperplane(std::cos(phi) * a + std::sin(phi) * b));
  }
  return out;
}

class Recorder {
 public:
  explicit Recorder(std::string scene) : scene_(std::move(scene)) {}

  void below(const std::string& check, Json params, double value, double tol, std::string note = {}) {
    params["tol"] = tol;
    push(check, std::move(params), value, tol - value, value < tol, std::move(note));
  }
  void equal(const std::string& check, Json params, double value, double expected, std::string note = {}) {
    params["expected"] = expected;
    const double gap = std::abs(value - expected);
    push(check, std::move(params), value, -gap, gap < 0.5, std::move(note));
  }
  void holds(const std::string& check, Json params, bool ok, std::string note = {}) {
    push(check, std::move(params), ok ? 1.0 : 0.0, ok ? 0.0 : -1.0, ok, std::move(note));
  }
  void failed(const std::string& check, Json params, const std::exception& e) {
    push(check, std::move(params), 0.0, -1.0, false, std::string("error: ") + e.what());
  }
  std::vector<CatalogCheck> take() { return std::move(out_); }

 private:
  void push(const std::string& check, Json params, double value, double margin, bool pass, std::string note) {
    out_.push_back({check, scene_, std::move(params), value, margin, pass, std::move(note)});
  }
  std::string scene_;
  std::vector<CatalogCheck> out_;
};

// Lazily built analyzers and cached classifications shared by the tasks.
class Context {
 public:
  explicit Context(const CatalogOptions& opts) : opts_(opts) {
    copts_.fiber.schedule = opts.schedule;
    copts_.fiber.eps_g = opts.eps_g;
  }

  const CatalogOptions& opts() const { return opts_; }

  const Analyzer& analyzer(const std::string& name) {
    std::shared_future<std::shared_ptr<Analyzer>> fut;
    bool owner = false;
    std::promise<std::shared_ptr<Analyzer>> prom;
    {
      std::lock_guard lock(mu_);
      auto it = analyzers_.find(name);
      if (it == analyzers_.end()) {
        fut = prom.get_future().share();
        analyzers_.emplace(name, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        prom.set_value(std::make_shared<Analyzer>(load_scene(resolve_scene_path(name)), copts_));
      } catch (...) {
        prom.set_exception(std::current_exception());
      }
    }
    return *fut.get();
  }

  const RayClassification& classify(const std::string& name, const Vec& v) {
    std::string key = name;
    for (Eigen::Index i = 0; i < v.size(); ++i) key += "," + num(v[i]);
    std::shared_future<std::shared_ptr<RayClassification>> fut;
    bool owner = false;
    std::promise<std::shared_ptr<RayClassification>> prom;
    {
      std::lock_guard lock(mu_);
      auto it = classified_.find(key);
      if (it == classified_.end()) {
        fut = prom.get_future().share();
        classified_.emplace(key, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        prom.set_value(std::make_shared<RayClassification>(analyzer(name).classify(Ray(v))));
      } catch (...) {
        prom.set_exception(std::current_exception());
      }
    }
    return *fut.get();
  }

 private:
  const CatalogOptions& opts_;
  ClassifyOptions copts_;
  std::mutex mu_;
  std::map<std::string, std::shared_future<std::shared_ptr<Analyzer>>> analyzers_;
  std::map<std::string, std::shared_future<std::shared_ptr<RayClassification>>> classified_;
};

struct Task {
  std::string scene;
  std::string name;
  std::function<void(Context&, Recorder&)> run;
};

Vec whitney_ray(double t) { return unit({0.0, std::sin(t), std::cos(t)}); }

// ------------------------------------------------------------------ tasks

void whitney_exceptional(Context& ctx, Recorder& rec) {
  const double eps = ctx.opts().eps_g;
  const auto pencil = axis_pencil(axis(0, 3), axis(2, 3), kPi, 400);
  for (double s : {1.0, -1.0}) {
    const Vec v = unit({0.0, s, 0.0});
    const Json p{{"ray", vec_json(v)}};
    const RayClassification& rc = ctx.classify("whitney", v);
    if (!rc.fiber) {
      rec.holds("exceptional_fiber.estimated", p, false, rc.note);
      continue;
    }
    const FiberEstimate& f = *rc.fiber;
    const auto planes = finest_members(f);
    rec.equal("exceptional_fiber.clusters", p, static_cast<double>(f.clusters.size()), 1);
    rec.holds("exceptional_fiber.stabilized", p, f.stabilized);
    rec.holds("exceptional_fiber.multi_plane", p, f.multi(eps));
    // Still multi-plane with the threshold doubled.
    rec.below("exceptional_fiber.threshold_margin", p, 2.0 * 3.0 * eps, f.diameter());
    rec.below("exceptional_fiber.contains_y_axis", p, max_ray_offset(planes, v), 0.02);
    rec.below("exceptional_fiber.pencil_hausdorff", p, planes.empty() ? kPi : hausdorff_planes(planes, pencil), 0.05);
    rec.equal("exceptional_fiber.dim_estimate", p, f.clusters.empty() ? 0 : f.clusters[0].dim_estimate, 1);
    rec.equal("exceptional_fiber.components", p, static_cast<double>(fiber_connectivity(f, eps).size()), 1);
    rec.holds("exceptional_fiber.verdict", p, rc.verdict == Verdict::exceptional_b, to_string(rc.verdict));
  }
}

void whitney_ordinary(Context& ctx, Recorder& rec) {
  const GrassPoint x0 = hyperplane(axis(0, 3));
  int wrong = 0, multi = 0;
  double worst = 0.0;
  std::string note;
  for (int i = 0; i < 20; ++i) {
    const double mag = 0.1 + 1.1 * (i / 2) / 9.0;
    const double t = i % 2 == 0 ? mag : -mag;
    const RayClassification& rc = ctx.classify("whitney", whitney_ray(t));
    if (rc.verdict != Verdict::ordinary) {
      ++wrong;
      note += "t=" + num(t) + ":" + to_string(rc.verdict) + " ";
    }
    if (!rc.fiber || rc.fiber->clusters.size() != 1) {
      ++multi;
      continue;
    }
    worst = std::max(worst, max_angle_to(finest_members(*rc.fiber), x0));
  }
  const Json p{{"rays", 20}, {"t_range", {0.1, 1.2}}};
  rec.equal("ordinary_rays.non_ordinary", p, wrong, 0, note);
  rec.equal("ordinary_rays.not_single_cluster", p, multi, 0);
  rec.below("ordinary_rays.plane_x0", p, worst, 0.02);
}

void whitney_grid(Context& ctx, Recorder& rec) {
  constexpr int kRays = 500;
  const double cell = kPi / kRays;
  std::vector<Ray> rays;
  for (int i = 0; i < kRays; ++i) rays.emplace_back(whitney_ray(-kPi / 2 + (i + 0.5) * cell));
  const auto rcs = ctx.analyzer("whitney").classify_all(rays, ctx.opts().jobs);
  int outside = 0, total = 0;
  bool low = false, high = false;
  for (int i = 0; i < kRays; ++i) {
    if (rcs[i].verdict != Verdict::exceptional_b) continue;
    ++total;
    const bool near_low = i <= 1, near_high = i >= kRays - 2;
    low = low || near_low;
    high = high || near_high;
    if (!near_low && !near_high) ++outside;
  }
  const Json p{{"rays", kRays}, {"grid", "cell-centered"}};
  rec.equal("nowhere_density.exceptional_off_boundary", p, outside, 0);
  rec.below("nowhere_density.exceptional_fraction", p, total / static_cast<double>(kRays), 2.0 / kRays + 1e-12);
  rec.holds("nowhere_density.both_boundaries_found", p, low && high);
}

void cusp_checks(Context& ctx, Recorder& rec) {
  const Analyzer& an = ctx.analyzer("cusp");
  const Vec e3 = axis(2, 3);
  double worst = 0.0;
  for (const auto& d : an.cone().link()) worst = std::max(worst, (d - e3).norm());
  rec.below("cone_link.single_direction", {{"direction", vec_json(e3)}}, worst, 0.02);
  rec.equal("cone_link.clusters", Json::object(), static_cast<double>(an.cone().clusters.size()), 1);
  const RayClassification& rc = ctx.classify("cusp", e3);
  const Json p{{"ray", vec_json(e3)}};
  if (rc.fiber) {
    const auto pencil = axis_pencil(axis(0, 3), axis(1, 3), kPi * (1.0 - 1.0 / 400), 400);
    const auto planes = finest_members(*rc.fiber);
    rec.below("fiber.pencil_hausdorff", p, planes.empty() ? kPi : hausdorff_planes(planes, pencil), 0.05);
  } else {
    rec.holds("fiber.estimated", p, false, rc.note);
  }
  rec.holds("verdict.exceptional", p, rc.verdict == Verdict::exceptional_b, to_string(rc.verdict));
  rec.holds("verdict.cone_dim_below_d", {{"cone_dim", an.cone().cone_dim}, {"d", an.scene().d}},
            an.cone().cone_dim < an.scene().d);
}

void tangent_cones_checks(Context& ctx, Recorder& rec) {
  const Analyzer& an = ctx.analyzer("tangent_cones");
  const Vec e3 = axis(2, 3);
  const Json p{{"ray", vec_json(e3)}};
  try {
    rec.holds("crease.detected", p, cone_tangent_at(an.cone(), e3).crease);
  } catch (const Error& e) {
    rec.failed("crease.detected", p, e);
  }
  const RayClassification& rc = ctx.classify("tangent_cones", e3);
  if (rc.fiber) {
    rec.equal("fiber.clusters", p, static_cast<double>(rc.fiber->clusters.size()), 1);
    rec.below("fiber.plane_w2", p, max_angle_to(finest_members(*rc.fiber), hyperplane(axis(1, 3))), 0.02);
  } else {
    rec.holds("fiber.estimated", p, false, rc.note);
  }
  rec.holds("verdict.not_exceptional", p, rc.verdict != Verdict::exceptional_b, to_string(rc.verdict));
}

void codim2_checks(Context& ctx, Recorder& rec) {
  const double eps = ctx.opts().eps_g;
  const Vec e4 = axis(3, 4);
  const Json p{{"ray", vec_json(e4)}};
  const RayClassification& rc = ctx.classify("codim2", e4);
  if (!rc.fiber) {
    rec.holds("fiber.estimated", p, false, rc.note);
    return;
  }
  const FiberEstimate& f = *rc.fiber;
  int stable = 0;
  for (const auto& c : f.clusters) stable += c.stabilized ? 1 : 0;
  rec.equal("fiber.clusters", p, static_cast<double>(f.clusters.size()), 2);
  rec.equal("fiber.stabilized_clusters", p, stable, 2);
  double gap = kPi;
  if (f.clusters.size() == 2) {
    gap = std::abs(angle_subspaces(f.clusters[0].representative, f.clusters[1].representative) - kPi / 2);
  }
  rec.below("fiber.representatives_perpendicular", p, gap, 0.05);
  rec.equal("fiber.components", p, static_cast<double>(fiber_connectivity(f, eps).size()), 2);
}

void crossed_planes_checks(Context& ctx, Recorder& rec) {
  const GrassPoint w1 = hyperplane(axis(0, 3)), w2 = hyperplane(axis(1, 3));
  for (double s : {1.0, -1.0}) {
    const Vec v = unit({0.0, 0.0, s});
    const Json p{{"ray", vec_json(v)}};
    const RayClassification& rc = ctx.classify("crossed_planes", v);
    if (!rc.fiber) {
      rec.holds("fiber.estimated", p, false, rc.note);
      continue;
    }
    const FiberEstimate& f = *rc.fiber;
    rec.equal("fiber.clusters", p, static_cast<double>(f.clusters.size()), 2);
    double worst = 0.0;
    for (const GrassPoint* target : {&w1, &w2}) {
      double best = kPi;
      for (const auto& c : f.clusters) best = std::min(best, max_angle_to(c.members, *target));
      worst = std::max(worst, best);
    }
    rec.below("fiber.planes_w1_w2", p, worst, 0.02);
  }
  const double h = hausdorff(ctx.analyzer("crossed_planes").cone().link(),
                             ctx.analyzer("crossed_planes_closed").cone().link());
  rec.below("closure_invariance.link_hausdorff", {{"against", "crossed_planes_closed"}}, h, 0.02);
}

void gradient_checks(Context& ctx, Recorder& rec) {
  GradientBoundOptions go;
  go.count = ctx.opts().gradient_pairs;
  go.seed = ctx.opts().schedule.seed;
  go.jobs = 1;

  std::mt19937_64 rng(derive_seed(go.seed, 31, 0));
  std::normal_distribution<double> g;
  auto random_plane = [&](Vec& normal, double& offset) {
    normal = Vec(3);
    for (int i = 0; i < 3; ++i) normal[i] = g(rng);
    normal.normalize();
    offset = 0.5 * g(rng);
    return num(normal[0]) + "*x + " + num(normal[1]) + "*y + " + num(normal[2]) + "*z - " + num(offset);
  };
  Vec n1, n2;
  double c1 = 0.0, c2 = 0.0;
  const std::string f1 = random_plane(n1, c1), f2 = random_plane(n2, c2);

  struct Config {
    std::string name;
    Scene scene;
    Patch y, z;
  };
  std::vector<Config> configs;
  configs.push_back({"random_planes",
                     inline_scene(R"({"name": "random_planes", "ambient_dim": 3, "declared_dim": 2, "pieces": [)"
                                  R"({"equations": [")" + f1 + R"("]}, {"equations": [")" + f2 + R"("]}]})"),
                     {0, c1 * n1, 1.0},
                     {1, c2 * n2, 1.0}});
  configs.push_back({"whitney_sheets",
                     inline_scene(R"({"name": "whitney_sheets", "ambient_dim": 3, "declared_dim": 2, "pieces": [)"
                                  R"({"equations": ["x^2 - y^2*z"], "gt": ["x*y"]},)"
                                  R"({"equations": ["x^2 - y^2*z"], "gt": ["-x*y"]}]})"),
                     {0, unit({0.0, 0.5, 0.1}) * 0.51, 0.3},
                     {1, unit({0.0, 0.5, 0.1}) * 0.51, 0.3}});
  configs.push_back({"spheres",
                     inline_scene(R"({"name": "spheres", "ambient_dim": 3, "declared_dim": 2, "pieces": [)"
                                  R"({"equations": ["(x - 0.5)^2 + y^2 + z^2 - 1"]},)"
                                  R"({"equations": ["(x + 0.5)^2 + y^2 + z^2 - 1"]}]})"),
                     {0, unit({1.0, 0.0, 0.0}) * 1.5, 0.8},
                     {1, unit({-1.0, 0.0, 0.0}) * 1.5, 0.8}});
  for (const auto& c : configs) {
    const Json p{{"pair", c.name}, {"pairs", go.count}};
    try {
      const GradientBoundReport r = check_gradient_bound(c.scene, c.y, c.z, go);
      rec.below("gradient_bound." + c.name + ".margin", p, -r.min_margin, go.margin_tol);
      rec.below("gradient_bound." + c.name + ".finite_difference", p, r.max_fd_error, go.fd_tol);
      rec.below("gradient_bound." + c.name + ".norm_at_most_sqrt2", p, r.max_norm, std::numbers::sqrt2 + 1e-9);
      rec.equal("gradient_bound." + c.name + ".pairs", p, r.pairs, go.count);
    } catch (const std::exception& e) {
      rec.failed("gradient_bound." + c.name, p, e);
    }
  }
}

void two_sided_checks(Context&, Recorder& rec) {
  const Scene flat = inline_scene(R"({"name": "flat", "ambient_dim": 3, "declared_dim": 2,
    "pieces": [{"equations": ["x"]}]})");
  const Scene half = inline_scene(R"({"name": "half_plane", "ambient_dim": 3, "declared_dim": 2,
    "pieces": [{"equations": ["x"], "ge": ["z"]}]})");
  const double alpha = 0.6;
  struct Case {
    std::string name;
    const Scene* scene;
    Vec p;
    double theta;
  };
  const std::vector<Case> cases{{"flat", &flat, axis(0, 3), kPi / 2},
                                {"half_plane", &half, unit({std::sin(alpha), 0.0, std::cos(alpha)}), alpha}};
  for (const auto& c : cases) {
    for (double R : {10.0, 100.0}) {
      const Json p{{"case", c.name}, {"R", R}, {"p", vec_json(c.p)}};
      try {
        const TwoSidedReport r = check_two_sided_bounds(*c.scene, Vec::Zero(3), c.p, R);
        rec.holds("two_sided." + c.name + ".witness", p, r.pass, "delta_R = " + num(r.delta_R));
        rec.below("two_sided." + c.name + ".theta", p, std::abs(r.theta - c.theta), 1e-3);
      } catch (const std::exception& e) {
        rec.failed("two_sided." + c.name, p, e);
      }
    }
  }
}

void flow_checks(Context&, Recorder& rec) {
  const Scene sheets = inline_scene(R"({"name": "whitney_sheets", "ambient_dim": 3, "declared_dim": 2, "pieces": [
    {"equations": ["x^2 - y^2*z"], "gt": ["x*y"]}, {"equations": ["x^2 - y^2*z"], "gt": ["-x*y"]}]})");
  const double r = 0.01, delta = 0.3;
  for (double s : {1.0, -1.0}) {
    const Ball ball{unit({0.0, s, 0.0}) * r, r * delta};
    for (double c : {0.05, 0.2}) {
      // y on x = y sqrt(z) (xy > 0), z on x = -y sqrt(z) (xy < 0), both near r (0, s, 0).
      const double z1 = c * r, y1 = s * r, z2 = 0.8 * c * r, y2 = s * 1.1 * r;
      Vec p0(3), q0(3);
      p0 << y1 * std::sqrt(z1), y1, z1;
      q0 << -y2 * std::sqrt(z2), y2, z2;
      const Json p{{"ball_center", vec_json(ball.center)}, {"ball_radius", ball.radius}, {"start_z_ratio", c}};
      try {
        const FlowTrace t = flow_between_sheets(sheets, 0, 1, p0, q0, ball);
        if (t.termination == FlowTermination::patch_exit) {
          // No continuous analog; inconclusive rather than failed.
          rec.holds("flow.terminates_critical", p, true, "inconclusive: patch_exit");
        } else {
          rec.holds("flow.terminates_critical", p, t.critical(), to_string(t.termination));
          rec.below("flow.terminal_angle", p, t.terminal_angle, 0.05);
        }
        rec.holds("flow.strictly_decreasing", p, t.strictly_decreasing());
        rec.below("flow.decrease_matches_steps", p, t.decrease_error(), 0.05);
        rec.below("flow.length_bound", p, t.arc_length,
                  std::numbers::sqrt2 * t.steps.front().rho / std::max(t.min_grad_norm, 1e-300) + 1e-15);
      } catch (const std::exception& e) {
        rec.failed("flow", p, e);
      }
    }
  }
}

void perpendicular_checks(Context& ctx, Recorder& rec) {
  auto span2 = [](const Vec& a, const Vec& b) {
    Mat m(a.size(), 2);
    m.col(0) = a;
    m.col(1) = b;
    return GrassPoint(m);
  };
  struct Case {
    std::string scene;
    Vec ray;
    GrassPoint q;
  };
  const std::vector<Case> cases{{"cusp", axis(2, 3), span2(axis(0, 3), axis(2, 3))},
                                {"codim2", axis(3, 4), span2(axis(1, 4), axis(3, 4))}};
  PerpendicularOptions po;
  po.schedule = ctx.opts().schedule;
  for (const auto& c : cases) {
    const Json p{{"scene", c.scene}, {"ray", vec_json(c.ray)}, {"Q", to_json(c.q)}};
    try {
      const Analyzer& an = ctx.analyzer(c.scene);
      const PerpendicularReport r = check_perpendicular_limit(an.scene(), an.cone(), Ray(c.ray), c.q, po);
      rec.below("perpendicular." + c.scene, p, std::abs(r.angle - kPi / 2), po.tol);
    } catch (const std::exception& e) {
      rec.failed("perpendicular." + c.scene, p, e);
    }
  }
}

void metric_checks(Context& ctx, Recorder& rec) {
  std::mt19937_64 rng(derive_seed(ctx.opts().schedule.seed, 41, 0));
  std::normal_distribution<double> g;
  auto rnd = [&] {
    Mat m(4, 2);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) m(i, j) = g(rng);
    return GrassPoint(m);
  };
  double tri = 0.0, sym = 0.0, self = 0.0, neg = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const GrassPoint a = rnd(), b = rnd(), c = rnd();
    const double ab = angle_subspaces(a, b), bc = angle_subspaces(b, c), ac = angle_subspaces(a, c);
    tri = std::max(tri, ac - ab - bc);
    sym = std::max(sym, std::abs(ab - angle_subspaces(b, a)));
    self = std::max(self, angle_subspaces(a, a));
    neg = std::max(neg, -std::min({ab, bc, ac}));
  }
  const Json p{{"triples", 1000}, {"grassmannian", "G(2,4)"}};
  rec.below("metric.triangle_excess", p, tri, 1e-10);
  rec.below("metric.asymmetry", p, sym, 1e-10);
  rec.below("metric.self_distance", p, self, 1e-10);
  rec.below("metric.negativity", p, neg, 1e-10);
}

void fiber_invariants(Context& ctx, Recorder& rec) {
  const double eps = ctx.opts().eps_g;
  struct Item {
    std::string scene;
    Vec ray;
  };
  const std::vector<Item> items{{"whitney", unit({0, 1, 0})},     {"whitney", unit({0, -1, 0})},
                                {"whitney", whitney_ray(0.5)},    {"whitney", whitney_ray(-1.0)},
                                {"cusp", axis(2, 3)},             {"tangent_cones", axis(2, 3)},
                                {"crossed_planes", axis(2, 3)},   {"two_fibers", axis(2, 3)},
                                {"codim2", axis(3, 4)},           {"plane", unit({1, 1, 0})}};
  double containment = 0.0, contain_plane = 0.0;
  int empty = 0, disconnected = 0;
  std::string note;
  for (const auto& it : items) {
    const RayClassification& rc = ctx.classify(it.scene, it.ray);
    if (!rc.fiber || rc.fiber->clusters.empty()) {
      ++empty;
      note += it.scene + " ";
      continue;
    }
    containment = std::max(containment, max_ray_offset(finest_members(*rc.fiber), it.ray));
    if (!rc.evidence.singular_flag) contain_plane = std::max(contain_plane, rc.evidence.contains_TvC_min_angle);
    const Scene& s = ctx.analyzer(it.scene).scene();
    if (rc.verdict == Verdict::exceptional_b && s.d == s.n - 1) {
      const auto comps = fiber_connectivity(*rc.fiber, eps);
      if (comps.size() != 1 || comps[0].dim_estimate < 1) ++disconnected;
    }
  }
  const Json p{{"rays", static_cast<int>(items.size())}};
  rec.below("invariant.ray_containment", p, containment, 0.02);
  rec.equal("invariant.fiber_nonempty", p, empty, 0, note);
  rec.below("invariant.contain_plane", p, contain_plane, 3 * eps);
  rec.equal("invariant.hypersurface_connectivity", p, disconnected, 0);

  int over = 0;
  std::string over_note;
  for (const char* name : {"whitney", "cusp", "plane", "tangent_cones", "crossed_planes", "crossed_planes_closed",
                           "two_fibers", "codim2", "codim2_prime"}) {
    const Analyzer& an = ctx.analyzer(name);
    if (an.cone().cone_dim > an.scene().d) {
      ++over;
      over_note += std::string(name) + " ";
    }
  }
  rec.equal("invariant.cone_dim_at_most_d", {{"scenes", 9}}, over, 0, over_note);
}

std::vector<Task> all_tasks() {
  return {
      {"whitney", "exceptional_fiber", whitney_exceptional},
      {"whitney", "ordinary_rays", whitney_ordinary},
      {"whitney", "nowhere_density", whitney_grid},
      {"cusp", "cone_and_fiber", cusp_checks},
      {"tangent_cones", "crease_and_fiber", tangent_cones_checks},
      {"codim2", "two_clusters", codim2_checks},
      {"crossed_planes", "two_planes", crossed_planes_checks},
      {"harness", "gradient_bound", gradient_checks},
      {"harness", "two_sided", two_sided_checks},
      {"harness", "flow", flow_checks},
      {"harness", "perpendicular", perpendicular_checks},
      {"harness", "metric", metric_checks},
      {"catalog", "fiber_invariants", fiber_invariants},
  };
}

}  // namespace

std::vector<CatalogCheck> run_catalog(const CatalogOptions& opts) {
  std::vector<Task> tasks;
  for (auto& t : all_tasks()) {
    if (opts.filter.empty() || (t.scene + "/" + t.name).find(opts.filter) != std::string::npos) {
      tasks.push_back(std::move(t));
    }
  }
  Context ctx(opts);
  std::vector<std::vector<CatalogCheck>> results(tasks.size());
  parallel_for(tasks.size(), opts.jobs, [&](std::size_t i) {
    Recorder rec(tasks[i].scene);
    try {
      tasks[i].run(ctx, rec);
    } catch (const std::exception& e) {
      rec.failed(tasks[i].name, Json::object(), e);
    }
    results[i] = rec.take();
  });
  std::vector<CatalogCheck> out;
  for (auto& r : results) {
    for (auto& c : r) out.push_back(std::move(c));
  }
  return out;
}

Json to_json(const CatalogCheck& c) {
  Json j;
  j["check"] = c.check;
  j["scene"] = c.scene;
  j["parameters"] = c.parameters;
  j["value"] = std::isfinite(c.value) ? Json(c.value) : Json(nullptr);
  j["margin"] = std::isfinite(c.margin) ? Json(c.margin) : Json(nullptr);
  j["pass"] = c.pass;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

}  // namespace nashfiber
