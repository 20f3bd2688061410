#include "nashfiber/error.hpp"
#include "nashfiber/harness.hpp"
#include "nashfiber/json_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

using namespace nashfiber;

namespace {

constexpr int kExitAnalysis = 1;
constexpr int kExitIo = 2;
constexpr int kExitInconclusive = 3;

constexpr const char* kSphereMapSchema = "sphere-map/1";

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::string scene;
  std::string ray;
  std::string json_out;
  std::string csv_out;
  std::string dump_out;
  std::string filter;
  ScaleSchedule schedule;
  std::uint64_t seed = ScaleSchedule{}.seed;
  double eps_g = kEpsG;
  double cone_gate = ClassifyOptions{}.cone_gate;
  int jobs = std::max(1u, std::thread::hardware_concurrency());
  int grid = 200;
  int cone_count = 0;
  int gradient_pairs = 10000;
  double radius = 1.0;
  int count = 600;
  int neighbors = 16;
  bool strict = false;
  bool with_fiber = false;
};

Scene load(const Config& c) {
  try {
    return load_scene(resolve_scene_path(c.scene));
  } catch (const Error& e) {
    throw IoFailure(e.what());
  } catch (const std::exception& e) {
    throw IoFailure("cannot read scene " + c.scene + ": " + e.what());
  }
}

ScaleSchedule schedule_of(const Config& c) {
  ScaleSchedule s = c.schedule;
  s.seed = c.seed;
  if (const char* env = std::getenv("NASHFIBER_SEED")) {
    try {
      s.seed = std::stoull(env, nullptr, 0);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, std::string("NASHFIBER_SEED is not an integer: ") + env);
    }
  }
  s.validate();
  return s;
}

ClassifyOptions classify_options(const Config& c) {
  if (!(c.eps_g > 0.0) || !(c.cone_gate > 0.0)) throw Error(ErrorKind::InvalidArgument, "thresholds must be positive");
  ClassifyOptions o;
  o.fiber.schedule = schedule_of(c);
  o.fiber.eps_g = c.eps_g;
  o.fiber.jobs = c.jobs;
  o.cone.schedule = o.fiber.schedule;
  o.cone.count = c.cone_count;
  o.cone.jobs = c.jobs;
  o.cone_gate = c.cone_gate;
  return o;
}

Vec parse_ray(const std::string& text, int n) {
  std::vector<double> xs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      xs.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "bad ray component '" + item + "'");
    }
  }
  if (static_cast<int>(xs.size()) != n)
    throw Error(ErrorKind::DimensionMismatch, "ray has " + std::to_string(xs.size()) + " components, scene has " +
                                                  std::to_string(n));
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = xs[i];
  return Ray(v).direction();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out || !(out << text)) throw IoFailure("cannot write " + path);
}

std::string fmt_vec(const Vec& v) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = std::abs(v[i]) < 5e-4 ? 0.0 : v[i];
    os << (i ? "," : "") << std::setprecision(3) << x;
  }
  os << ")";
  return os.str();
}

// Covered arc of a 1-dimensional link cluster, from the largest angular gap
// within its best-fit plane.
std::string describe_arc(const ConeEstimate& cone, const LinkCluster& c) {
  const PointCloud& link = cone.link();
  Mat m(cone.n, static_cast<Eigen::Index>(c.members.size()));
  for (std::size_t i = 0; i < c.members.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = link[c.members[i]];
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const Vec a = svd.matrixU().col(0), b = svd.matrixU().col(1);
  std::vector<double> phi;
  for (Eigen::Index i = 0; i < m.cols(); ++i) phi.push_back(std::atan2(m.col(i).dot(b), m.col(i).dot(a)));
  std::sort(phi.begin(), phi.end());
  double gap = phi.front() + 2 * std::numbers::pi - phi.back();
  for (std::size_t i = 1; i < phi.size(); ++i) gap = std::max(gap, phi[i] - phi[i - 1]);
  const double arc = 2 * std::numbers::pi - gap;
  if (arc > 2 * std::numbers::pi - 0.3) return "great circle";
  if (std::abs(arc - std::numbers::pi) < 0.15) return "half great circle";
  std::ostringstream os;
  os << "arc of " << std::setprecision(3) << arc << " rad";
  return os.str();
}

std::string describe_link(const ConeEstimate& cone) {
  if (cone.clusters.empty()) return "empty";
  std::vector<std::string> parts;
  for (const auto& c : cone.clusters) {
    if (c.dim == 0) {
      parts.push_back("1 point " + fmt_vec(c.center));
    } else if (c.dim == 1) {
      parts.push_back(describe_arc(cone, c));
    } else {
      parts.push_back(std::to_string(c.dim) + "-dimensional region around " + fmt_vec(c.center));
    }
  }
  std::string out = parts.size() == 1 ? parts[0] : std::to_string(parts.size()) + " components: ";
  if (parts.size() > 1)
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "; " : "") + parts[i];
  return out;
}

int cmd_cone(const Config& c) {
  const Scene scene = load(c);
  const ClassifyOptions o = classify_options(c);
  const ConeEstimate cone = estimate_cone(scene, o.cone);
  if (!c.json_out.empty()) write_text(c.json_out, to_json(cone).dump(2) + "\n");
  if (c.json_out != "-") {
    std::cout << "scene: " << scene.name << " (n = " << scene.n << ", d = " << scene.d << ")\n";
    std::cout << "link: " << describe_link(cone) << ", dim C = " << cone.cone_dim << "\n";
    std::cout << "stabilized: " << (cone.stabilized ? "yes" : "no") << ", link points: " << cone.link().size()
              << ", finest radius: " << cone.radii.at(cone.finest) << "\n";
    for (std::size_t p = 0; p < cone.initial_forms.size(); ++p) {
      std::cout << "initial forms of piece " << p << ":";
      for (const auto& f : cone.initial_forms[p]) std::cout << "  " << f.to_string();
      std::cout << "\n";
    }
  }
  return 0;
}

int cmd_fiber(const Config& c) {
  const Scene scene = load(c);
  const ClassifyOptions o = classify_options(c);
  const Ray ray(parse_ray(c.ray, scene.n));
  if (!c.dump_out.empty()) write_text(c.dump_out, sample_json_lines(run_schedule(scene, ray, o.fiber.schedule)));
  const FiberEstimate f = estimate_fiber(scene, ray, o.fiber);
  write_text(c.json_out, to_json(f).dump(2) + "\n");
  return f.stabilized ? 0 : kExitInconclusive;
}

int cmd_classify(const Config& c) {
  const Analyzer an(load(c), classify_options(c));
  const RayClassification rc = an.classify(Ray(parse_ray(c.ray, an.scene().n)));
  write_text(c.json_out, to_json(rc, c.with_fiber).dump(2) + "\n");
  return rc.verdict == Verdict::inconclusive ? kExitInconclusive : 0;
}

std::vector<Vec> sphere_grid(int n, int count, std::uint64_t seed) {
  std::vector<Vec> out;
  if (n == 2) {
    for (int i = 0; i < count; ++i) {
      const double t = 2 * std::numbers::pi * (i + 0.5) / count;
      Vec v(2);
      v << std::cos(t), std::sin(t);
      out.push_back(v);
    }
  } else if (n == 3) {
    // Fibonacci lattice.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / count;
      const double rho = std::sqrt(1.0 - z * z);
      Vec v(3);
      v << rho * std::cos(golden * i), rho * std::sin(golden * i), z;
      out.push_back(v);
    }
  } else {
    for (int i = 0; i < count; ++i) {
      std::mt19937_64 rng(derive_seed(seed, 51, static_cast<std::uint64_t>(i)));
      std::normal_distribution<double> g;
      Vec v(n);
      for (int k = 0; k < n; ++k) v[k] = g(rng);
      out.push_back(v.normalized());
    }
  }
  return out;
}

int cmd_sphere_map(const Config& c) {
  if (c.grid < 1) throw Error(ErrorKind::InvalidArgument, "--grid must be positive");
  const Analyzer an(load(c), classify_options(c));
  const int n = an.scene().n;
  std::vector<Ray> rays;
  for (const Vec& v : sphere_grid(n, c.grid, schedule_of(c).seed)) rays.emplace_back(v);
  const auto rcs = an.classify_all(rays, c.jobs);
  std::ostringstream os;
  os << "schema";
  for (int i = 1; i <= n; ++i) os << ",x" << i;
  os << ",verdict,fiber_diameter,cluster_count\n" << std::setprecision(17);
  for (std::size_t i = 0; i < rays.size(); ++i) {
    os << kSphereMapSchema;
    for (int k = 0; k < n; ++k) os << "," << rays[i].direction()[k];
    os << "," << to_string(rcs[i].verdict) << "," << rcs[i].evidence.fiber_diameter << ","
       << rcs[i].evidence.cluster_count << "\n";
  }
  write_text(c.csv_out, os.str());
  return 0;
}

int cmd_verify(const Config& c) {
  CatalogOptions o;
  o.schedule = schedule_of(c);
  o.eps_g = c.eps_g;
  o.filter = c.filter;
  o.gradient_pairs = c.gradient_pairs;
  o.jobs = c.jobs;
  const auto report = run_catalog(o);
  Json j = Json::array();
  int failed = 0;
  for (const auto& check : report) {
    j.push_back(to_json(check));
    failed += check.pass ? 0 : 1;
  }
  if (!c.json_out.empty()) write_text(c.json_out, j.dump(2) + "\n");
  if (c.json_out != "-") {
    for (const auto& check : report) {
      std::cout << (check.pass ? "PASS " : "FAIL ") << check.scene << "/" << check.check << "  value "
                << check.value << "  margin " << check.margin;
      if (!check.note.empty()) std::cout << "  (" << check.note << ")";
      std::cout << "\n";
    }
    std::cout << report.size() - failed << " passed, " << failed << " failed\n";
  }
  return failed > 0 ? kExitAnalysis : 0;
}

int cmd_dump_samples(const Config& c) {
  const Scene scene = load(c);
  const ScaleSchedule s = schedule_of(c);
  write_text(c.dump_out, sample_json_lines(run_schedule(scene, Ray(parse_ray(c.ray, scene.n)), s)));
  return 0;
}

int cmd_check_dimension(const Config& c) {
  const Scene scene = load(c);
  const DimensionCheck r =
      check_dimension(scene, Vec::Zero(scene.n), c.radius, c.count, schedule_of(c).seed, c.neighbors);
  if (!c.json_out.empty()) {
    Json j{{"scene", scene.name},          {"declared", r.declared}, {"estimated", r.estimated},
           {"histogram", r.histogram},     {"points", r.points},     {"consistent", r.consistent}};
    write_text(c.json_out, j.dump(2) + "\n");
  }
  if (c.json_out != "-") {
    std::cout << "scene: " << scene.name << ", declared d = " << r.declared << ", local PCA estimate = "
              << r.estimated << " over " << r.points << " points\n";
    std::cout << "histogram:";
    for (std::size_t k = 0; k < r.histogram.size(); ++k) std::cout << " " << k << ":" << r.histogram[k];
    std::cout << "\n";
  }
  if (!r.consistent) {
    std::cerr << "warning: declared dimension " << r.declared << " differs from the estimate " << r.estimated << "\n";
    if (c.strict) return kExitAnalysis;
  }
  return 0;
}

void add_schedule_flags(CLI::App* app, Config& c) {
  app->add_option("--r0", c.schedule.r0, "Coarsest radius")->capture_default_str();
  app->add_option("--lambda", c.schedule.lambda, "Radius ratio between scales")->capture_default_str();
  app->add_option("--K", c.schedule.K, "Number of scales")->capture_default_str();
  app->add_option("--delta0", c.schedule.delta0, "Coarsest aperture")->capture_default_str();
  app->add_option("--mu", c.schedule.mu, "Aperture ratio between scales")->capture_default_str();
  app->add_option("--samples", c.schedule.samples_per_scale, "Seeds per scale")->capture_default_str();
  app->add_option("--seed", c.seed, "Random seed (NASHFIBER_SEED overrides)")->capture_default_str();
}

void add_threshold_flags(CLI::App* app, Config& c) {
  app->add_option("--eps-g", c.eps_g, "Grassmannian cluster threshold (rad)")->capture_default_str();
  app->add_option("--cone-gate", c.cone_gate, "Chordal distance to the link beyond which a ray is off the cone")
      ->capture_default_str();
  app->add_option("--cone-count", c.cone_count, "Seeds per sphere for the cone (0 = by dimension)")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tangent-plane limits (Nash fibers) along rays of semialgebraic tangent cones"};
  app.require_subcommand(1);
  Config c;
  app.add_option("--jobs,-j", c.jobs, "Worker threads")->capture_default_str();

  auto* cone = app.add_subcommand("cone", "Estimate the tangent cone at the origin");
  cone->add_option("scene", c.scene, "Scene file or catalog name")->required();
  cone->add_option("--json", c.json_out, "Write the ConeEstimate JSON here ('-' for stdout only)");
  add_schedule_flags(cone, c);
  add_threshold_flags(cone, c);

  auto* fiber = app.add_subcommand("fiber", "Estimate the fiber of tangent-plane limits along a ray");
  fiber->add_option("scene", c.scene, "Scene file or catalog name")->required();
  fiber->add_option("--ray", c.ray, "Ray direction, comma separated")->required();
  fiber->add_option("--json", c.json_out, "Output file (default stdout)");
  fiber->add_option("--dump-samples", c.dump_out, "Also write the scale samples as JSON lines");
  add_schedule_flags(fiber, c);
  add_threshold_flags(fiber, c);

  auto* classify = app.add_subcommand("classify", "Classify a ray of the cone");
  classify->add_option("scene", c.scene, "Scene file or catalog name")->required();
  classify->add_option("--ray", c.ray, "Ray direction, comma separated")->required();
  classify->add_option("--json", c.json_out, "Output file (default stdout)");
  classify->add_flag("--with-fiber", c.with_fiber, "Include the fiber estimate");
  add_schedule_flags(classify, c);
  add_threshold_flags(classify, c);

  auto* sphere = app.add_subcommand("sphere-map", "Classify a grid of directions and write CSV");
  sphere->add_option("scene", c.scene, "Scene file or catalog name")->required();
  sphere->add_option("--grid", c.grid, "Number of directions")->capture_default_str();
  sphere->add_option("--out,-o", c.csv_out, "CSV file (default stdout)");
  add_schedule_flags(sphere, c);
  add_threshold_flags(sphere, c);

  auto* verify = app.add_subcommand("verify", "Run the expected-answer suite over the catalog");
  verify->add_option("--filter", c.filter, "Substring of scene/check to run");
  verify->add_option("--json", c.json_out, "Write the JSON report here ('-' for stdout only)");
  verify->add_option("--gradient-pairs", c.gradient_pairs, "Pairs per gradient-bound check")->capture_default_str();
  add_schedule_flags(verify, c);
  verify->add_option("--eps-g", c.eps_g, "Grassmannian cluster threshold (rad)")->capture_default_str();

  auto* dump = app.add_subcommand("dump-samples", "Write the scale samples along a ray as JSON lines");
  dump->add_option("scene", c.scene, "Scene file or catalog name")->required();
  dump->add_option("--ray", c.ray, "Ray direction, comma separated")->required();
  dump->add_option("--out,-o", c.dump_out, "Output file (default stdout)");
  add_schedule_flags(dump, c);

  auto* dim = app.add_subcommand("check-dimension", "Compare the declared dimension with local PCA of samples");
  dim->add_option("scene", c.scene, "Scene file or catalog name")->required();
  dim->add_option("--radius", c.radius, "Sampling ball radius around the origin")->capture_default_str();
  dim->add_option("--count", c.count, "Seeds")->capture_default_str();
  dim->add_option("--neighbors", c.neighbors, "Neighbors per local PCA")->capture_default_str();
  dim->add_option("--json", c.json_out, "Write the result as JSON ('-' for stdout only)");
  dim->add_option("--seed", c.seed, "Random seed (NASHFIBER_SEED overrides)")->capture_default_str();
  dim->add_flag("--strict", c.strict, "Exit 1 when the dimensions differ");

  CLI11_PARSE(app, argc, argv);
  if (c.jobs < 1) c.jobs = 1;

  try {
    if (*cone) return cmd_cone(c);
    if (*fiber) return cmd_fiber(c);
    if (*classify) return cmd_classify(c);
    if (*sphere) return cmd_sphere_map(c);
    if (*verify) return cmd_verify(c);
    if (*dump) return cmd_dump_samples(c);
    if (*dim) return cmd_check_dimension(c);
  } catch (const IoFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Io ? kExitIo : kExitAnalysis;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAnalysis;
  }
  return kExitAnalysis;
}
