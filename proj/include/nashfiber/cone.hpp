#pragma once

#include "nashfiber/sampler.hpp"

#include <vector>

namespace nashfiber {

/// Chordal threshold for link membership and linkage clustering.
inline constexpr double kLinkEps = 0.05;
/// Normalized residual allowed for the initial-form cross-check.
inline constexpr double kInitialFormTol = 5e-3;

struct ConeOptions {
  ScaleSchedule schedule;
  /// Seeds per sphere; 0 picks a default from the ambient dimension.
  int count = 0;
  bool require_regular = true;
  int jobs = 1;
};

struct LinkCluster {
  std::vector<std::size_t> members;  // indices into the finest link cloud
  Vec center;                        // normalized mean direction
  double diameter = 0.0;             // chordal
  int dim = 0;
};

struct ConeEstimate {
  int n = 0;
  int d = 0;
  std::vector<double> radii;
  std::vector<PointCloud> link_samples;                // per scale, unit directions
  std::vector<std::vector<std::size_t>> link_pieces;   // piece of each direction
  std::vector<double> trace;                           // consecutive Hausdorff distances
  bool stabilized = false;
  std::size_t finest = 0;                              // index of the scale used for the limit
  std::vector<LinkCluster> clusters;
  std::vector<std::vector<Polynomial>> initial_forms;  // per piece
  int cone_dim = 0;

  const PointCloud& link() const { return link_samples.at(finest); }
  bool empty() const { return link_samples.empty() || link().empty(); }
};

/// Samples full spheres of the scheduled radii, checks that the direction
/// clouds settle, then clusters the finest cloud. Throws NotStabilized.
ConeEstimate estimate_cone(const Scene& scene, const ConeOptions& opts = {});

/// Largest normalized initial-form residual over the finest link directions.
double initial_form_residual(const ConeEstimate& cone);

struct ConeTangent {
  Vec direction;
  Mat link_basis;  // n x m orthonormal, m = dim of the link at v
  GrassPoint full_tangent;
  int link_dim = 0;
  int cluster_dim = 0;
  bool boundary = false;
  bool crease = false;
  bool singular_flag = false;
  bool cvc_is_d_plane = false;
};

/// Local structure of the cone at v from the link cloud of one scale
/// (defaults to the finest). Throws NotOnCone or InsufficientDensity.
ConeTangent cone_tangent_at(const ConeEstimate& cone, const Vec& v,
                            std::optional<std::size_t> scale = std::nullopt);

/// Chordal distance from v to the finest link cloud (+inf when it is empty).
double distance_to_link(const ConeEstimate& cone, const Vec& v);

/// Cone of the singular part, from the scene's own singular_locus or a
/// derived one. Sampling ignores regularity.
ConeEstimate estimate_singular_cone(const Scene& scene, const ConeOptions& opts = {});

/// True when v lies within kLinkEps of the cone of the singular part.
bool ray_in_cprime(const Scene& scene, const Ray& ray, const ConeOptions& opts = {});
bool ray_in_cprime(const ConeEstimate& singular_cone, const Ray& ray);

/// Single-linkage components of a point cloud at chordal threshold eps.
std::vector<std::vector<std::size_t>> linkage_components(const PointCloud& pts, double eps);

}  // namespace nashfiber
