#pragma once

#include "nashfiber/json_io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nashfiber {

/// A ball on one piece of a scene.
struct Patch {
  std::size_t piece = 0;
  Vec center;
  double radius = 0.0;
};

/// One pair (y, z) on two hypersurface pieces.
struct GradientBoundSample {
  Vec y, z;
  Vec u;  // unit chord (y - z) / |y - z|
  double restricted_gradient_norm = 0.0;
  double tangent_angle = 0.0;
  double margin = 0.0;    // norm - sin(angle) / sqrt 2
  double fd_error = 0.0;  // analytic vs central differences along the tangent frames
};

/// Restricted gradient of |y - z| on T_y Y x T_z Z. Throws InvalidArgument when y = z.
GradientBoundSample gradient_bound_sample(const Vec& y, const GrassPoint& ty, const Vec& z,
                                          const GrassPoint& tz, double fd_step = 1e-6);

/// Same, with tangent spaces taken from the scene. Throws SingularSample when
/// either point is not a regular point of its piece.
GradientBoundSample gradient_bound_sample(const Scene& scene, std::size_t piece_y, const Vec& y,
                                          std::size_t piece_z, const Vec& z);

struct GradientBoundReport {
  int pairs = 0;
  int pool_y = 0, pool_z = 0;
  double min_margin = 0.0;
  double max_norm = 0.0;
  double max_fd_error = 0.0;
  GradientBoundSample worst;
  bool pass = false;
};

struct GradientBoundOptions {
  int count = 10000;
  /// Points drawn on each patch; pairs are formed among them.
  int pool = 600;
  double margin_tol = 1e-9;
  double fd_tol = 1e-4;
  std::uint64_t seed = 0x5EED;
  int jobs = 1;
};

/// Samples `count` pairs on two hypersurface patches and checks
/// |grad| >= sin(angle) / sqrt 2. Throws EmptyPatch or InvalidArgument.
GradientBoundReport check_gradient_bound(const Scene& scene, const Patch& y, const Patch& z,
                                         const GradientBoundOptions& opts = {});

struct NearestPoint {
  Vec x;
  std::size_t piece = 0;
  double distance = 0.0;
  std::optional<GrassPoint> tangent;  // set at regular points
};

/// Closest point of the scene to q found by ball sampling around q (radius
/// `search_radius`, or |q| when the origin lies on the set) followed by
/// foot-point refinement. Throws EmptyPatch.
NearestPoint nearest_point(const Scene& scene, const Vec& q, std::optional<double> search_radius = std::nullopt,
                           int count = 400, std::uint64_t seed = 0x5EED);

struct TwoSidedEntry {
  double t = 0.0;
  double distance = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool holds = false;
};

struct TwoSidedReport {
  double theta = 0.0;
  double R = 0.0;
  double delta_R = 0.0;  // 0 when no witness was found
  std::vector<TwoSidedEntry> grid;
  bool pass = false;
};

struct TwoSidedOptions {
  /// Grid of t values; empty gives t = 2^(-i/4), i = 2..60.
  std::vector<double> t_grid;
  ConeOptions cone;
  int nearest_count = 400;
};

/// Checks t (sin theta - 1/R) < dist(v + t p, Y) < t (sin theta + 1/R) on a
/// grid and reports the largest dyadic delta_R <= 1/R below which all grid
/// points hold. theta comes from the estimated cone at v. Throws RayInCone.
TwoSidedReport check_two_sided_bounds(const Scene& scene, const Vec& v, const Vec& p, double R,
                                      const TwoSidedOptions& opts = {});

/// Scene translated so that v becomes the origin.
Scene translate_scene(const Scene& scene, const Vec& v);

enum class FlowTermination { critical_point, contact, patch_exit, step_limit };
std::string to_string(FlowTermination t);

struct FlowStep {
  Vec y, z;
  double rho = 0.0;
  double h = 0.0;          // predicted decrease of rho for the step leading here
  double grad_norm = 0.0;  // at this point
};

struct FlowTrace {
  std::vector<FlowStep> steps;
  FlowTermination termination = FlowTermination::step_limit;
  double terminal_angle = 0.0;  // angle between the tangent spaces at the last pair
  double arc_length = 0.0;      // in Y x Z
  double min_grad_norm = 0.0;
  /// A critical point of rho, or a contact where rho reaches its minimum 0
  /// with tangent spaces agreeing within `angle_tol`. A transversal contact
  /// (crossing pieces) is not critical.
  bool critical(double angle_tol = kEpsG) const {
    return termination == FlowTermination::critical_point ||
           (termination == FlowTermination::contact && terminal_angle < angle_tol);
  }
  bool strictly_decreasing() const;
  /// Largest relative gap between rho(m) and rho(0) - sum of h.
  double decrease_error() const;
};

struct Ball {
  Vec center;
  double radius = 0.0;
};

struct FlowOptions {
  int max_steps = 100000;
  double critical_grad = 1e-6;
  /// rho below contact_tol * ball radius counts as contact.
  double contact_tol = 1e-6;
  /// Accepted steps must decrease rho by h within this relative error.
  double step_accuracy = 0.05;
};

/// Normalized descent of rho(y, z) = |y - z| on Y x Z inside the ball, with
/// Newton re-projection after every Euler step. Throws ProjectionLoss.
FlowTrace flow_between_sheets(const Scene& scene, std::size_t piece_y, std::size_t piece_z,
                              const Vec& y0, const Vec& z0, const Ball& ball,
                              const FlowOptions& opts = {});

struct PerpendicularScale {
  int k = 0;
  double r = 0.0;
  double t = 0.0;
  Vec nearest;  // rescaled to the unit ball
  GrassPoint plane;
  double angle_to_q = 0.0;
};

struct PerpendicularReport {
  Vec p;                    // direction of Q outside C_v C
  double theta = 0.0;       // angle of p to C_v C
  double containment = 0.0; // largest angle of C_v C into Q
  std::vector<PerpendicularScale> scales;
  std::optional<GrassPoint> limit;  // accumulation plane P
  double angle = 0.0;               // angle(P, Q)
  bool pass = false;
};

struct PerpendicularOptions {
  ScaleSchedule schedule;
  /// Scales at the fine end whose planes form the accumulation plane.
  int window = 3;
  double tol = 0.1;
  int nearest_count = 300;
};

/// Rescaling construction: for each scale r_k the point nearest to
/// r_k (v + t_k p), t_k = delta_k / 3, and its tangent plane. Requires a cone
/// estimate of the scene. Throws HypothesisFailed when Q has no ray outside
/// C_v C, or NotOnCone.
PerpendicularReport check_perpendicular_limit(const Scene& scene, const ConeEstimate& cone,
                                              const Ray& ray, const GrassPoint& q,
                                              const PerpendicularOptions& opts = {});

struct CatalogCheck {
  std::string check;
  std::string scene;
  Json parameters;
  double value = 0.0;
  double margin = 0.0;  // nonnegative when the check holds
  bool pass = false;
  std::string note;
};

struct CatalogOptions {
  ScaleSchedule schedule;
  double eps_g = kEpsG;
  /// Substring filter on "scene/check"; empty runs everything.
  std::string filter;
  int gradient_pairs = 10000;
  int jobs = 1;
};

/// Expected-answer suite over the example catalog. Failures are entries of
/// the report; nothing is thrown for a failing check.
std::vector<CatalogCheck> run_catalog(const CatalogOptions& opts = {});

Json to_json(const CatalogCheck& c);

}  // namespace nashfiber
