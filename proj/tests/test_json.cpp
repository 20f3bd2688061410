#include "test_util.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace nashfiber;
using namespace testutil;

TEST_CASE("grass point round trip") {
  Mat m(4, 2);
  m << 1, 0, 2, 1, 0, 3, -1, 1;
  const GrassPoint p(m);
  const GrassPoint q = grasspoint_from_json(to_json(p));
  CHECK(angle_subspaces(p, q) < 1e-12);
  CHECK(q.n() == 4);
  CHECK(q.k() == 2);
}

TEST_CASE("malformed grass point") {
  CHECK(kind_of([] { grasspoint_from_json(Json{{"n", 3}, {"k", 2}, {"basis", {1, 0, 0}}}); }) ==
        ErrorKind::InvalidArgument);
  CHECK(kind_of([] { grasspoint_from_json(Json{{"k", 2}}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("scene round trip keeps every piece") {
  for (const char* name : {"whitney", "two_fibers", "crossed_planes", "codim2"}) {
    CAPTURE(name);
    const Scene s = catalog(name);
    const Scene t = scene_from_json(to_json(s));
    CHECK(t.n == s.n);
    CHECK(t.d == s.d);
    REQUIRE(t.pieces.size() == s.pieces.size());
    for (std::size_t i = 0; i < s.pieces.size(); ++i) {
      CHECK(t.pieces[i].equations() == s.pieces[i].equations());
      CHECK(t.pieces[i].weak() == s.pieces[i].weak());
      CHECK(t.pieces[i].strict() == s.pieces[i].strict());
      CHECK(t.pieces[i].exclusions() == s.pieces[i].exclusions());
    }
  }
}

TEST_CASE("scene with an explicit singular locus") {
  const Json j = Json::parse(R"({"name": "s", "ambient_dim": 3, "declared_dim": 2,
    "pieces": [{"equations": ["x*y"]}],
    "singular_locus": [{"equations": ["x", "y"]}]})");
  const Scene s = scene_from_json(j);
  REQUIRE(s.singular_locus.has_value());
  CHECK(s.singular_locus->size() == 1);
  CHECK(to_json(s).contains("singular_locus"));
}

TEST_CASE("scene errors") {
  CHECK(kind_of([] { scene_from_json(Json::parse(R"({"ambient_dim": 3, "declared_dim": 2})")); }) ==
        ErrorKind::InvalidArgument);
  CHECK(kind_of([] {
          scene_from_json(Json::parse(R"({"ambient_dim": 2, "declared_dim": 1, "pieces": [{"equations": ["x + q"]}]})"));
        }) == ErrorKind::UnknownVariable);
  CHECK(kind_of([] { load_scene("/nonexistent/scene.json"); }) == ErrorKind::Io);
  CHECK(kind_of([] { resolve_scene_path("no_such_catalog_entry"); }) == ErrorKind::Io);

  const auto bad = std::filesystem::temp_directory_path() / "nashfiber_bad_scene.json";
  std::ofstream(bad) << "{ not json";
  CHECK(kind_of([&] { load_scene(bad); }) == ErrorKind::Io);
  std::filesystem::remove(bad);
}

TEST_CASE("catalog names resolve") {
  CHECK(std::filesystem::exists(resolve_scene_path("whitney")));
  CHECK(catalog("cusp").n == 3);
}

TEST_CASE("schedule overrides") {
  const ScaleSchedule s = schedule_from_json(Json{{"K", 6}, {"seed", 7}});
  CHECK(s.K == 6);
  CHECK(s.seed == 7u);
  CHECK(s.r0 == ScaleSchedule{}.r0);
  const ScaleSchedule t = schedule_from_json(to_json(s));
  CHECK(t.K == 6);
  CHECK(t.mu == s.mu);
  CHECK(kind_of([] { schedule_from_json(Json{{"lambda", 1.5}}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("fiber JSON round trip reproduces connectivity") {
  const Scene s = catalog("crossed_planes");
  const FiberEstimate f = estimate_fiber(s, Ray(e(2)));
  const Json j = to_json(f);
  const FiberEstimate g = fiber_from_json(Json::parse(j.dump()));
  CHECK(g.clusters.size() == f.clusters.size());
  CHECK(g.stabilized == f.stabilized);
  CHECK(g.per_scale_planes.size() == f.per_scale_planes.size());
  CHECK(fiber_connectivity(g).size() == fiber_connectivity(f).size());
  CHECK(j["components"].size() == fiber_connectivity(f).size());
  for (std::size_t i = 0; i < f.clusters.size(); ++i) {
    CHECK(angle_subspaces(f.clusters[i].representative, g.clusters[i].representative) < 1e-12);
    CHECK(g.clusters[i].trace.size() == f.clusters[i].trace.size());
  }
}

TEST_CASE("infinite trace entries survive as null") {
  FiberEstimate f;
  f.ray = e(2);
  f.clusters.push_back(FiberCluster{hyperplane(e(0)), {hyperplane(e(0))}, 0.0, 0, false,
                                    {std::numeric_limits<double>::infinity(), 0.01}, 0.0});
  const Json j = to_json(f);
  CHECK(j["limit_clusters"][0]["trace"][0].is_null());
  const FiberEstimate g = fiber_from_json(j);
  CHECK(std::isinf(g.clusters[0].trace[0]));
  CHECK(g.clusters[0].trace[1] == doctest::Approx(0.01));
}

TEST_CASE("classification JSON carries verdict and evidence") {
  RayClassification rc;
  rc.ray = e(1);
  rc.verdict = Verdict::singular_cone_ray;
  rc.evidence.singular_flag = true;
  const Json j = to_json(rc);
  CHECK(j["verdict"] == "singular_cone_ray");
  CHECK(j["evidence"]["in_Eprime"].is_null());
  CHECK(j["thresholds"]["eps_g"] == doctest::Approx(kEpsG));
  CHECK_FALSE(j.contains("fiber"));
}
