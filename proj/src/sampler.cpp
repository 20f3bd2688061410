#include "nashfiber/sampler.hpp"

#include "nashfiber/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

namespace nashfiber {

namespace {

constexpr double kGoldenAngle = 2.399963229728653;  // pi * (3 - sqrt 5)
constexpr double kSineFloor = 1e-7;

double van_der_corput(std::uint64_t i) {
  double q = 0.0, bit = 0.5;
  while (i > 0) {
    if (i & 1u) q += bit;
    bit *= 0.5;
    i >>= 1;
  }
  return q;
}

Vec gaussian_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Vec v(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  } while (v.norm() < 1e-12);
  return v.normalized();
}

// Unit direction in R^m used as the tangential part of a cap point.
Vec tangential_direction(std::size_t i, std::size_t count, Eigen::Index m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jit(-0.5, 0.5);
  if (m == 1) return Vec::Constant(1, (i / 2) % 2 == 0 ? 1.0 : -1.0);
  if (m == 2) {
    double phi = static_cast<double>(i) * kGoldenAngle + 0.05 * jit(rng);
    return Vec{{std::cos(phi), std::sin(phi)}};
  }
  if (m == 3) {
    double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5 + 0.2 * jit(rng)) / static_cast<double>(count);
    z = std::clamp(z, -1.0, 1.0);
    double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = static_cast<double>(i) * kGoldenAngle;
    return Vec{{rho * std::cos(phi), rho * std::sin(phi), z}};
  }
  return gaussian_unit(rng, m);
}

// Seed direction in the cap of sine-radius delta around v. Even indices are
// spread uniformly in area, odd ones log-uniformly in the sine of the offset
// so that structure at offsets far below delta is also seen.
Vec cap_direction(const Vec& v, const Mat& perp, double delta, std::size_t i, std::size_t count,
                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jit(-0.5, 0.5);
  const std::size_t half = std::max<std::size_t>(1, (count + 1) / 2);
  const std::size_t j = i / 2;
  double q = perp.cols() == 3 ? van_der_corput(j + 1)
                              : (static_cast<double>(j) + 0.5 + 0.5 * jit(rng)) / static_cast<double>(half);
  q = std::clamp(q, 0.0, 1.0);
  const double alpha = std::asin(std::min(delta, 1.0));
  double sine;
  if (i % 2 == 0 || delta <= kSineFloor) {
    double theta = std::acos(1.0 - q * (1.0 - std::cos(alpha)));
    sine = std::sin(theta);
  } else {
    sine = std::exp(std::log(kSineFloor) + q * (std::log(delta) - std::log(kSineFloor)));
  }
  const double cosine = std::sqrt(std::max(0.0, 1.0 - sine * sine));
  Vec w = tangential_direction(i, count, perp.cols(), rng);
  return cosine * v + sine * (perp * w);
}

Vec sphere_direction(std::size_t i, std::size_t count, Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jit(-0.5, 0.5);
  if (n == 1) return Vec::Constant(1, i % 2 == 0 ? 1.0 : -1.0);
  if (n == 2) {
    double a = 2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5 + 0.5 * jit(rng)) /
               static_cast<double>(count);
    return Vec{{std::cos(a), std::sin(a)}};
  }
  if (n == 3) return tangential_direction(i, count, 3, rng);
  return gaussian_unit(rng, n);
}

struct Region {
  std::optional<double> radius;  // sphere constraint
  std::function<bool(const Vec&)> inside;
};

void project_seed(const Scene& scene, const Vec& seed_point, const Region& region,
                  const SampleOptions& opts, std::vector<SamplePoint>& out, RejectCounts& rej) {
  for (std::size_t p = 0; p < scene.pieces.size(); ++p) {
    const BasicPiece& piece = scene.pieces[p];
    Vec x;
    try {
      x = newton_project(piece, seed_point, region.radius);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::SignViolation) ++rej.sign_violation;
      else ++rej.no_convergence;
      continue;
    }
    if (region.radius) {
      const double r = *region.radius;
      if (std::abs(x.norm() - r) > 1e-9 * r) {
        ++rej.off_variety;
        continue;
      }
    }
    if (x.norm() == 0.0) {
      ++rej.singular;
      continue;
    }
    const ScaledPiece sp = piece.scaled(x.norm());
    if (!satisfies_scaled(sp, x / x.norm(), kSignTol) || !satisfies(piece, x, kSignTol)) {
      ++rej.sign_violation;
      continue;
    }
    if (!region.inside(x)) {
      ++rej.outside_cone;
      continue;
    }
    SamplePoint sp_out{x, p, std::nullopt};
    if (opts.require_regular) {
      try {
        TangentSpaceResult t = tangent_space_at(scene, p, x);
        if (!t.regular) {
          ++rej.singular;
          continue;
        }
        sp_out.tangent = std::move(t);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::OffVariety) ++rej.off_variety;
        else ++rej.singular;
        continue;
      }
    }
    out.push_back(std::move(sp_out));
  }
}

// Evaluates seeds in parallel and merges in index order.
ScaleSample collect(const Scene& scene, std::size_t count, const Region& region,
                    const SampleOptions& opts, const std::function<Vec(std::size_t)>& seed_at) {
  std::vector<std::vector<SamplePoint>> slots(count);
  std::vector<RejectCounts> rejects(count);
  parallel_for(count, opts.jobs, [&](std::size_t i) {
    project_seed(scene, seed_at(i), region, opts, slots[i], rejects[i]);
  });
  ScaleSample s;
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& p : slots[i]) s.points.push_back(std::move(p));
    s.rejected.no_convergence += rejects[i].no_convergence;
    s.rejected.off_variety += rejects[i].off_variety;
    s.rejected.singular += rejects[i].singular;
    s.rejected.sign_violation += rejects[i].sign_violation;
    s.rejected.outside_cone += rejects[i].outside_cone;
  }
  return s;
}

}  // namespace

double ScaleSchedule::radius(int k) const { return r0 * std::pow(lambda, k); }
double ScaleSchedule::aperture(int k) const { return delta0 * std::pow(mu, k); }

void ScaleSchedule::validate() const {
  if (!(r0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "r0 must be positive");
  if (!(lambda > 0.0 && lambda < 1.0)) throw Error(ErrorKind::InvalidArgument, "lambda must lie in (0,1)");
  if (K < 1) throw Error(ErrorKind::InvalidArgument, "K must be at least 1");
  if (!(delta0 > 0.0 && delta0 <= 1.0)) throw Error(ErrorKind::InvalidArgument, "delta0 must lie in (0,1]");
  if (!(mu > 0.0 && mu <= 1.0)) throw Error(ErrorKind::InvalidArgument, "mu must lie in (0,1]");
  if (samples_per_scale < 1) throw Error(ErrorKind::InvalidArgument, "samples_per_scale must be positive");
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ull) ^ (index * 0xD1B54A32D192ED03ull);
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ScaleSample sample_sphere_slice(const Scene& scene, const Ray& ray, double r, double delta,
                                int count, std::uint64_t seed, const SampleOptions& opts) {
  if (ray.dim() != scene.n) throw Error(ErrorKind::DimensionMismatch, "ray and scene dimensions");
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "aperture must lie in (0,1]");
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "count must be positive");
  const Vec& v = ray.direction();
  const Mat perp = line(v).complement();
  Region region{r, [&](const Vec& x) { return in_conical_neighborhood(x, ray, delta); }};
  auto seed_at = [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, 0, i));
    if (scene.n == 1) return Vec(r * v);
    return Vec(r * cap_direction(v, perp, delta, i, static_cast<std::size_t>(count), rng));
  };
  ScaleSample s = collect(scene, static_cast<std::size_t>(count), region, opts, seed_at);
  s.r = r;
  s.delta = delta;
  if (s.points.empty()) {
    throw Error(ErrorKind::EmptySlice, "no accepted point at r = " + std::to_string(r) +
                                           ", delta = " + std::to_string(delta));
  }
  return s;
}

std::vector<ScaleSample> run_schedule(const Scene& scene, const Ray& ray,
                                      const ScaleSchedule& schedule, const SampleOptions& opts) {
  schedule.validate();
  std::vector<ScaleSample> out;
  bool any = false;
  for (int k = 1; k <= schedule.K; ++k) {
    const double r = schedule.radius(k);
    const double delta = schedule.aperture(k);
    try {
      ScaleSample s = sample_sphere_slice(scene, ray, r, delta, schedule.samples_per_scale,
                                          schedule.seed ^ static_cast<std::uint64_t>(k), opts);
      s.k = k;
      out.push_back(std::move(s));
      any = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptySlice) throw;
      ScaleSample empty;
      empty.k = k;
      empty.r = r;
      empty.delta = delta;
      out.push_back(std::move(empty));
    }
  }
  if (!any) throw Error(ErrorKind::AllScalesEmpty, "no scale produced a point near the ray");
  return out;
}

ScaleSample sample_sphere(const Scene& scene, double r, int count, std::uint64_t seed,
                          const SampleOptions& opts) {
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "count must be positive");
  Region region{r, [](const Vec&) { return true; }};
  auto seed_at = [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, 1, i));
    return Vec(r * sphere_direction(i, static_cast<std::size_t>(count), scene.n, rng));
  };
  ScaleSample s = collect(scene, static_cast<std::size_t>(count), region, opts, seed_at);
  s.r = r;
  s.delta = 1.0;
  return s;
}

std::vector<SamplePoint> sample_ball(const Scene& scene, const Vec& center, double radius,
                                     int count, std::uint64_t seed, const SampleOptions& opts) {
  if (center.size() != scene.n) throw Error(ErrorKind::DimensionMismatch, "ball center");
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "count must be positive");
  Region region{std::nullopt, [&](const Vec& x) { return (x - center).norm() < radius; }};
  auto seed_at = [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, 2, i));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Vec dir = gaussian_unit(rng, scene.n);
    double rho = radius * std::pow(U(rng), 1.0 / static_cast<double>(scene.n));
    return Vec(center + rho * dir);
  };
  ScaleSample s = collect(scene, static_cast<std::size_t>(count), region, opts, seed_at);
  if (s.points.empty()) throw Error(ErrorKind::EmptyPatch, "no regular point in the ball");
  return std::move(s.points);
}

DimensionCheck check_dimension(const Scene& scene, const Vec& center, double radius, int count,
                               std::uint64_t seed, int neighbors) {
  if (neighbors < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 neighbors");
  SampleOptions so;
  so.require_regular = false;
  const auto pts = sample_ball(scene, center, radius, count, seed, so);
  DimensionCheck out;
  out.declared = scene.d;
  out.points = static_cast<int>(pts.size());
  out.histogram.assign(scene.n + 1, 0);
  const std::size_t m = std::min<std::size_t>(neighbors, pts.size());
  std::vector<std::pair<double, std::size_t>> dist(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) dist[j] = {(pts[j].x - pts[i].x).squaredNorm(), j};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m), dist.end());
    Mat nb(scene.n, m);
    for (std::size_t j = 0; j < m; ++j) nb.col(j) = pts[dist[j].second].x;
    const Vec mean = nb.rowwise().mean();
    nb.colwise() -= mean;
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(nb * nb.transpose()).eigenvalues();
    int dim = 0;
    if (ev.maxCoeff() > 0.0)
      for (Eigen::Index k = 0; k < ev.size(); ++k) dim += ev[k] > 0.1 * ev.maxCoeff() ? 1 : 0;
    ++out.histogram[dim];
  }
  out.estimated = static_cast<int>(std::max_element(out.histogram.begin(), out.histogram.end()) - out.histogram.begin());
  out.consistent = out.estimated == out.declared;
  return out;
}

}  // namespace nashfiber
