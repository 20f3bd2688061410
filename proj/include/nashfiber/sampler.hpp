#pragma once

#include "nashfiber/scene.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace nashfiber {

/// Radii r_k = r0 * lambda^k and apertures delta_k = delta0 * mu^k for k = 1..K.
struct ScaleSchedule {
  double r0 = 0.5;
  double lambda = 0.5;
  int K = 12;
  double delta0 = 0.4;
  double mu = 0.8;
  int samples_per_scale = 400;
  std::uint64_t seed = 0x5EED;

  double radius(int k) const;
  double aperture(int k) const;
  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
};

struct SamplePoint {
  Vec x;
  std::size_t piece = 0;
  std::optional<TangentSpaceResult> tangent;
};

struct RejectCounts {
  int no_convergence = 0;
  int off_variety = 0;
  int singular = 0;
  int sign_violation = 0;
  int outside_cone = 0;
  int total() const {
    return no_convergence + off_variety + singular + sign_violation + outside_cone;
  }
};

struct ScaleSample {
  int k = 0;
  double r = 0.0;
  double delta = 0.0;
  std::vector<SamplePoint> points;
  RejectCounts rejected;
};

struct SampleOptions {
  /// Keep only regular points (tangent space of the declared dimension and no
  /// active weak inequality). When false no tangent spaces are computed.
  bool require_regular = true;
  int jobs = 1;
};

/// Runs body(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

/// Stream seed for item `index` of the stream `stream` derived from `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Points of the scene on the sphere of radius r inside the delta-conical
/// neighborhood of the ray. Throws EmptySlice when nothing is accepted.
ScaleSample sample_sphere_slice(const Scene& scene, const Ray& ray, double r, double delta,
                                int count, std::uint64_t seed, const SampleOptions& opts = {});

/// One slice per scale with seeds seed ^ k; empty scales are kept.
/// Throws AllScalesEmpty when every slice is empty.
std::vector<ScaleSample> run_schedule(const Scene& scene, const Ray& ray,
                                      const ScaleSchedule& schedule,
                                      const SampleOptions& opts = {});

/// Points of the scene on the whole sphere of radius r.
ScaleSample sample_sphere(const Scene& scene, double r, int count, std::uint64_t seed,
                          const SampleOptions& opts = {});

/// Regular points of the scene inside the open ball B(center, radius).
/// Throws EmptyPatch when none is found.
std::vector<SamplePoint> sample_ball(const Scene& scene, const Vec& center, double radius,
                                     int count, std::uint64_t seed,
                                     const SampleOptions& opts = {});

struct DimensionCheck {
  int declared = 0;
  int estimated = 0;
  std::vector<int> histogram;  // points per local dimension 0..n
  int points = 0;
  bool consistent = false;
};

/// Local PCA over the `neighbors` nearest samples of each point in the ball;
/// the estimate is the most frequent local dimension. Throws EmptyPatch.
DimensionCheck check_dimension(const Scene& scene, const Vec& center, double radius, int count = 600,
                               std::uint64_t seed = 0x5EED, int neighbors = 16);

}  // namespace nashfiber
