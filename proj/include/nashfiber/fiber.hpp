#pragma once

#include "nashfiber/cone.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nashfiber {

/// Grassmannian clustering threshold (radians).
inline constexpr double kEpsG = 0.05;

struct FiberOptions {
  ScaleSchedule schedule;
  double eps_g = kEpsG;
  /// Number of finest scales clustered jointly.
  int window = 4;
  /// Per-scale aperture: the smallest dyadic fraction of delta_k that still
  /// holds this many points, but never below min(delta_k, aperture_floor * r_k).
  int min_points = 24;
  double aperture_floor = 32.0;
  /// When the tight estimate shows several planes, the window scales are
  /// resampled with this many seed batches at the full aperture.
  bool widen = true;
  int widen_oversample = 4;
  int jobs = 1;
};

struct FiberCluster {
  GrassPoint representative;
  std::vector<GrassPoint> members;  // finest-scale planes
  double diameter = 0.0;
  int dim_estimate = 0;
  bool stabilized = false;
  std::vector<double> trace;  // Hausdorff distance between consecutive scales
  /// Projected remaining drift of a compact cluster (0 for wide clusters).
  double drift_tail = 0.0;
};

struct FiberEstimate {
  Vec ray;
  std::vector<int> scales;
  std::vector<double> radii;
  std::vector<double> apertures;  // aperture actually used per scale
  std::vector<std::vector<GrassPoint>> per_scale_planes;
  std::vector<FiberCluster> clusters;
  /// True when the tight-aperture estimate already showed several planes and
  /// the full schedule aperture was used to record the whole fiber.
  bool widened = false;
  bool stabilized = false;
  int dropped_minor = 0;

  double diameter() const;
  bool multi(double eps_g = kEpsG) const;
};

/// Tangent-plane limits along the ray. Throws RayNotInCone when the ray has
/// no nearby points at any scale (or lies far from `cone` when given).
FiberEstimate estimate_fiber(const Scene& scene, const Ray& ray, const FiberOptions& opts = {},
                             const ConeEstimate* cone = nullptr);

struct FiberComponent {
  std::vector<GrassPoint> planes;
  int dim_estimate = 0;
};

/// Components of the eps_g-adjacency graph on the fiber's finest-scale planes.
std::vector<FiberComponent> fiber_connectivity(const FiberEstimate& fiber, double eps_g = kEpsG);

/// Dimension of a set of planes near `center`, by PCA of Grassmann log vectors.
int plane_set_dimension(const std::vector<GrassPoint>& planes, double eps_g = kEpsG);

/// Grassmann logarithm at p of q (n x k tangent matrix); q must not be at the cut locus.
Mat grassmann_log(const GrassPoint& p, const GrassPoint& q);

enum class Verdict { ordinary, exceptional_b, in_Eprime, singular_cone_ray, in_Cprime, not_in_cone, inconclusive };
std::string to_string(Verdict v);

struct Evidence {
  double cone_distance = 0.0;
  double fiber_diameter = 0.0;
  double distance_to_TvC = 0.0;
  double contains_TvC_min_angle = 0.0;
  int cluster_count = 0;
  bool cvc_is_d_plane = false;
  bool singular_flag = false;
  bool in_cprime = false;
  bool predicted_exceptional = false;
  bool stabilized = false;
  std::optional<bool> eprime;  // unset on singular cone rays
  int tvc_dim = 0;
};

struct RayClassification {
  Vec ray;
  Verdict verdict = Verdict::inconclusive;
  Evidence evidence;
  double eps_g = kEpsG;
  std::optional<FiberEstimate> fiber;
  std::string note;
};

struct ClassifyOptions {
  FiberOptions fiber;
  ConeOptions cone;
  /// Chordal distance to the link beyond which a ray is not in the cone.
  double cone_gate = 0.1;
};

/// Caches the cone and the singular cone of one scene so that many rays can
/// be classified cheaply and concurrently.
class Analyzer {
 public:
  Analyzer(Scene scene, ClassifyOptions opts = {});

  const Scene& scene() const { return scene_; }
  const ClassifyOptions& options() const { return opts_; }
  const ConeEstimate& cone() const { return cone_; }
  const ConeEstimate& singular_cone() const { return singular_; }

  RayClassification classify(const Ray& ray) const;
  FiberEstimate fiber(const Ray& ray) const;
  std::vector<RayClassification> classify_all(const std::vector<Ray>& rays, int jobs = 1) const;

 private:
  Scene scene_;
  ClassifyOptions opts_;
  ConeEstimate cone_;
  ConeEstimate singular_;
};

RayClassification classify_ray(const Scene& scene, const Ray& ray, const ClassifyOptions& opts = {});

struct ClosureReport {
  bool vacuous = false;
  std::string note;
  int neighbors = 0;
  double worst_distance = 0.0;      // accumulation planes to the fiber
  double tvc_containment = 0.0;     // limit of T_{v_j}C into some fiber plane
  bool pass = false;
};

/// Tilts the ray by 2^-j (j = 1..m) along link tangent directions and checks
/// that the neighbors' fiber planes accumulate inside the fiber of the ray.
ClosureReport fiber_closure_check(const Analyzer& analyzer, const Ray& ray, int m);

}  // namespace nashfiber
