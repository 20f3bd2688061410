#include "test_util.hpp"

#include "nashfiber/fiber.hpp"

#include <cmath>
#include <memory>
#include <numbers>

using namespace nashfiber;
using namespace testutil;

namespace {

const Analyzer& analyzer_of(const std::string& name) {
  static std::map<std::string, std::unique_ptr<Analyzer>> cache;
  auto& slot = cache[name];
  if (!slot) slot = std::make_unique<Analyzer>(catalog(name));
  return *slot;
}

Vec whitney_ray(double t) { return vec({0.0, std::sin(t), std::cos(t)}); }

// Planes (a, 0, b)^perp with a^2 + b^2 = 1, b >= 0.
std::vector<GrassPoint> y_axis_pencil(int count) {
  std::vector<GrassPoint> out;
  for (int i = 0; i < count; ++i) {
    const double phi = std::numbers::pi * i / (count - 1);
    out.push_back(hyperplane(vec({std::cos(phi), 0.0, std::sin(phi)})));
  }
  return out;
}

// Every plane containing the z-axis.
std::vector<GrassPoint> z_axis_pencil(int count) {
  std::vector<GrassPoint> out;
  for (int i = 0; i < count; ++i) {
    const double phi = std::numbers::pi * i / count;
    out.push_back(hyperplane(vec({std::cos(phi), std::sin(phi), 0.0})));
  }
  return out;
}

std::vector<GrassPoint> members(const FiberEstimate& f) {
  std::vector<GrassPoint> out;
  for (const auto& c : f.clusters) out.insert(out.end(), c.members.begin(), c.members.end());
  return out;
}

// Planes of the finest `window` scales that carry any.
std::vector<std::vector<GrassPoint>> window_planes(const FiberEstimate& f, int window = 4) {
  std::vector<std::vector<GrassPoint>> out;
  for (std::size_t i = f.per_scale_planes.size(); i-- > 0 && out.size() < static_cast<std::size_t>(window);)
    if (!f.per_scale_planes[i].empty()) out.insert(out.begin(), f.per_scale_planes[i]);
  return out;
}

}  // namespace

TEST_CASE("grassmann log has the principal angle as its norm") {
  for (double theta : {0.0, 0.1, 0.7, 1.3}) {
    CAPTURE(theta);
    const GrassPoint p = hyperplane(e(2));
    const GrassPoint q = hyperplane(vec({std::sin(theta), 0.0, std::cos(theta)}));
    const Mat l = grassmann_log(p, q);
    CHECK(l.norm() == doctest::Approx(theta).epsilon(1e-9));
    // Tangent vectors at p map p into its complement.
    CHECK((p.basis().transpose() * l).norm() < 1e-12);
  }
  Mat a(4, 2), b(4, 2);
  a << 1, 0, 0, 1, 0, 0, 0, 0;
  b << 1, 0, 0, 0, 0, 1, 0, 0;
  CHECK(kind_of([&] { grassmann_log(GrassPoint(a), hyperplane(e(0, 4))); }) == ErrorKind::DimensionMismatch);
  // span{e1, e2} and span{e1, e3} meet at a right principal angle: no logarithm.
  CHECK(kind_of([&] { grassmann_log(GrassPoint(a), GrassPoint(b)); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("plane set dimension of synthetic families") {
  CHECK(plane_set_dimension({hyperplane(e(0))}) == 0);
  std::vector<GrassPoint> tight;
  for (int i = 0; i < 20; ++i) tight.push_back(hyperplane(vec({1.0, 0.001 * i, 0.0})));
  CHECK(plane_set_dimension(tight) == 0);
  CHECK(plane_set_dimension(y_axis_pencil(60)) == 1);
  std::vector<GrassPoint> cap;
  for (int i = -6; i <= 6; ++i)
    for (int j = -6; j <= 6; ++j) cap.push_back(hyperplane(vec({0.08 * i, 0.08 * j, 1.0})));
  CHECK(plane_set_dimension(cap) == 2);
}

TEST_CASE("whitney boundary rays carry the y-axis pencil") {
  const Scene s = catalog("whitney");
  for (double sign : {1.0, -1.0}) {
    CAPTURE(sign);
    const FiberEstimate f = estimate_fiber(s, Ray(vec({0.0, sign, 0.0})));
    REQUIRE(f.clusters.size() == 1);
    const auto& c = f.clusters[0];
    CHECK(c.stabilized);
    CHECK(c.dim_estimate == 1);
    CHECK(c.diameter > 3 * kEpsG);
    for (const auto& p : c.members) CHECK(angle_vector_subspace(e(1), p) < 0.02);
    CHECK(hausdorff_planes(c.members, y_axis_pencil(400)) < 0.05);
    const auto comps = fiber_connectivity(f);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].dim_estimate >= 1);
  }
}

TEST_CASE("whitney interior rays carry the single plane x = 0") {
  const Scene s = catalog("whitney");
  for (double t : {-1.2, -0.5, 0.3, 1.0}) {
    CAPTURE(t);
    const FiberEstimate f = estimate_fiber(s, Ray(whitney_ray(t)));
    REQUIRE(f.clusters.size() == 1);
    CHECK(f.stabilized);
    CHECK(f.clusters[0].diameter < kEpsG);
    CHECK(angle_subspaces(f.clusters[0].representative, hyperplane(e(0))) < 0.02);
    CHECK_FALSE(f.widened);
  }
}

TEST_CASE("cusp fiber is every plane through the axis") {
  const FiberEstimate f = estimate_fiber(catalog("cusp"), Ray(e(2)));
  REQUIRE(f.clusters.size() == 1);
  CHECK(f.clusters[0].stabilized);
  CHECK(f.clusters[0].dim_estimate == 1);
  CHECK(hausdorff_planes(f.clusters[0].members, z_axis_pencil(400)) < 0.05);
  CHECK(fiber_connectivity(f).size() == 1);
}

TEST_CASE("tangent cone union has the single fiber plane y = 0 along e3") {
  const FiberEstimate f = estimate_fiber(catalog("tangent_cones"), Ray(e(2)));
  REQUIRE(f.clusters.size() == 1);
  CHECK(f.stabilized);
  CHECK(angle_subspaces(f.clusters[0].representative, hyperplane(e(1))) < 0.02);
  CHECK(f.clusters[0].diameter < kEpsG);
}

TEST_CASE("crossed planes carry two fiber planes along the axis") {
  for (double sign : {1.0, -1.0}) {
    const FiberEstimate f = estimate_fiber(catalog("crossed_planes"), Ray(sign * e(2)));
    const auto comps = fiber_connectivity(f);
    REQUIRE(comps.size() == 2);
    for (const auto& comp : comps) {
      const double a = angle_subspaces(comp.planes.front(), hyperplane(e(0)));
      const double b = angle_subspaces(comp.planes.front(), hyperplane(e(1)));
      CHECK(std::min(a, b) < 0.02);
      CHECK(comp.dim_estimate == 0);
    }
  }
}

TEST_CASE("rays off the cone have no fiber") {
  CHECK(kind_of([] { estimate_fiber(catalog("whitney"), Ray(e(0))); }) == ErrorKind::RayNotInCone);
  const auto& an = analyzer_of("whitney");
  CHECK(kind_of([&] { an.fiber(Ray(e(0))); }) == ErrorKind::RayNotInCone);
  CHECK(kind_of([] { estimate_fiber(catalog("whitney"), Ray(e(0, 4))); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("every fiber plane nearly contains the ray") {
  struct Case {
    const char* scene;
    Vec ray;
  };
  const std::vector<Case> cases{{"whitney", whitney_ray(0.4)},   {"whitney", whitney_ray(-1.1)},
                                {"whitney", vec({0, 1, 0})},     {"cusp", e(2)},
                                {"tangent_cones", e(2)},         {"crossed_planes", e(2)},
                                {"two_fibers", vec({0, 0, 1})},  {"plane", vec({0.6, 0.8, 0})}};
  // Containment decays like sqrt(r): the finest default radius is too coarse
  // for 5e-3 on the cusp, so the tight bound is checked on a longer schedule.
  FiberOptions deep;
  deep.schedule.K = 16;
  for (const auto& c : cases) {
    const std::string label = std::string(c.scene) + " " + std::to_string(c.ray[0]) + "," +
                              std::to_string(c.ray[1]) + "," + std::to_string(c.ray[2]);
    CAPTURE(label);
    const Vec v = c.ray.normalized();
    const FiberEstimate f = estimate_fiber(catalog(c.scene), Ray(v));
    CHECK_FALSE(f.clusters.empty());
    for (const auto& p : members(f)) CHECK(angle_vector_subspace(v, p) < 2e-2);

    const FiberEstimate g = estimate_fiber(catalog(c.scene), Ray(v), deep);
    const auto win = window_planes(g);
    std::vector<double> worst;
    for (const auto& planes : win) {
      double w = 0.0;
      for (const auto& p : planes) w = std::max(w, angle_vector_subspace(v, p));
      worst.push_back(w);
    }
    for (std::size_t i = 1; i < worst.size(); ++i) CHECK(worst[i] <= worst[i - 1] + 1e-3);
    CHECK(worst.back() < 5e-3);
  }
}

TEST_CASE("verdicts on the catalog") {
  CHECK(analyzer_of("whitney").classify(Ray(vec({0, 1, 0}))).verdict == Verdict::exceptional_b);
  CHECK(analyzer_of("whitney").classify(Ray(vec({0, -1, 0}))).verdict == Verdict::exceptional_b);
  CHECK(analyzer_of("whitney").classify(Ray(e(0))).verdict == Verdict::not_in_cone);
  CHECK(analyzer_of("whitney").classify(Ray(whitney_ray(0.7))).verdict == Verdict::ordinary);
  CHECK(analyzer_of("cusp").classify(Ray(e(2))).verdict == Verdict::exceptional_b);
  CHECK(analyzer_of("tangent_cones").classify(Ray(e(2))).verdict == Verdict::singular_cone_ray);
  CHECK(analyzer_of("crossed_planes").classify(Ray(e(2))).verdict == Verdict::in_Cprime);
  CHECK(analyzer_of("plane").classify(Ray(vec({1, 1, 0}))).verdict == Verdict::ordinary);
}

TEST_CASE("classification evidence is consistent with the verdict") {
  const auto& an = analyzer_of("whitney");
  for (double t : {-1.4, -0.9, -0.2, 0.5, 1.1, 1.5707963267948966}) {
    CAPTURE(t);
    const RayClassification rc = an.classify(Ray(whitney_ray(t)));
    const auto& ev = rc.evidence;
    if (rc.verdict == Verdict::ordinary) {
      CHECK(ev.cluster_count == 1);
      CHECK(ev.distance_to_TvC < kEpsG);
      REQUIRE(ev.eprime.has_value());
      CHECK_FALSE(*ev.eprime);
    }
    if (rc.verdict == Verdict::exceptional_b) {
      REQUIRE(rc.fiber.has_value());
      CHECK(rc.fiber->stabilized);
      CHECK((rc.fiber->clusters.size() >= 2 || rc.fiber->diameter() > 3 * kEpsG));
    }
    if (ev.singular_flag) CHECK_FALSE(ev.eprime.has_value());
  }
}

TEST_CASE("some fiber plane contains the cone tangent on non-singular rays") {
  for (const auto& [scene, ray] : std::vector<std::pair<const char*, Vec>>{
           {"whitney", whitney_ray(0.9)}, {"whitney", whitney_ray(-0.6)}, {"plane", vec({0, 1, 0})}}) {
    CAPTURE(scene);
    const RayClassification rc = analyzer_of(scene).classify(Ray(ray));
    REQUIRE_FALSE(rc.evidence.singular_flag);
    CHECK(rc.evidence.contains_TvC_min_angle <= 3 * kEpsG);
  }
}

TEST_CASE("exceptional rays of hypersurfaces have connected positive-dimensional fibers") {
  for (const auto& [scene, ray] : std::vector<std::pair<const char*, Vec>>{
           {"whitney", vec({0, 1, 0})}, {"whitney", vec({0, -1, 0})}, {"cusp", e(2)}}) {
    CAPTURE(scene);
    const RayClassification rc = analyzer_of(scene).classify(Ray(ray));
    REQUIRE(rc.verdict == Verdict::exceptional_b);
    const auto comps = fiber_connectivity(*rc.fiber);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].dim_estimate >= 1);
  }
}

TEST_CASE("classification is deterministic") {
  const Ray ray(whitney_ray(1.2));
  const Json a = to_json(analyzer_of("whitney").classify(ray), true);
  const Json b = to_json(Analyzer(catalog("whitney")).classify(ray), true);
  CHECK(a.dump() == b.dump());
}

TEST_CASE("classify_all keeps ray order and matches serial results") {
  const auto& an = analyzer_of("whitney");
  std::vector<Ray> rays;
  for (double t : {-1.0, -0.3, 0.4, 1.1}) rays.emplace_back(whitney_ray(t));
  const auto par = an.classify_all(rays, 3);
  REQUIRE(par.size() == rays.size());
  for (std::size_t i = 0; i < rays.size(); ++i) {
    CHECK((par[i].ray - rays[i].direction()).norm() == 0.0);
    CHECK(to_json(par[i]).dump() == to_json(an.classify(rays[i])).dump());
  }
}

TEST_CASE("tilted neighbors accumulate inside the fiber") {
  SUBCASE("whitney boundary ray") {
    const ClosureReport r = fiber_closure_check(analyzer_of("whitney"), Ray(vec({0, 1, 0})), 6);
    CHECK_FALSE(r.vacuous);
    CHECK(r.neighbors > 0);
    CHECK(r.worst_distance <= 2 * kEpsG);
    CHECK(r.pass);
  }
  SUBCASE("ordinary ray") {
    const ClosureReport r = fiber_closure_check(analyzer_of("whitney"), Ray(whitney_ray(0.6)), 5);
    CHECK(r.pass);
    CHECK(r.tvc_containment <= 2 * kEpsG);
  }
  SUBCASE("cusp has no admissible neighbors") {
    const ClosureReport r = fiber_closure_check(analyzer_of("cusp"), Ray(e(2)), 4);
    CHECK(r.vacuous);
    CHECK(r.pass);
  }
}
