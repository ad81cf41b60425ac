#pragma once

// Time-stepped reference for the conflict detector: sample both FLSs every
// dt seconds over their common flight window, then refine around the best
// sample by golden-section search (squared separation is convex in time).

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "flsplan/flsplan.hpp"

namespace flsplan::testkit {

inline Vec3 sampled_position(const FlightPath& p, double t) {
  const Vec3 d = p.destination.cell.as_vec();
  if (p.travel_time <= 0.0) return p.source;
  const double frac = std::clamp((t - p.launch_time) / p.travel_time, 0.0, 1.0);
  return p.source + (d - p.source) * frac;
}

/// Smallest in-flight separation, or nullopt when the flights never overlap in time.
inline std::optional<double> sampled_min_separation(const FlightPath& a, const FlightPath& b, double dt) {
  const double lo = std::max(a.launch_time, b.launch_time);
  const double hi = std::min(a.arrival_time(), b.arrival_time());
  if (lo > hi) return std::nullopt;
  const auto sep = [&](double t) {
    return euclidean_distance(sampled_position(a, t), sampled_position(b, t));
  };
  double best_t = lo;
  double best = sep(lo);
  const auto steps = static_cast<long>(std::ceil((hi - lo) / dt));
  for (long k = 1; k <= steps; ++k) {
    const double t = std::min(hi, lo + static_cast<double>(k) * dt);
    const double s = sep(t);
    if (s < best) {
      best = s;
      best_t = t;
    }
  }
  double l = std::max(lo, best_t - dt);
  double r = std::min(hi, best_t + dt);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100 && r - l > 1e-15; ++it) {
    const double m1 = r - g * (r - l);
    const double m2 = l + g * (r - l);
    if (sep(m1) < sep(m2)) {
      r = m2;
    } else {
      l = m1;
    }
  }
  return std::min(best, sep(0.5 * (l + r)));
}

/// Coarse geometric filter: the padded bounding boxes must overlap for the
/// FLSs ever to come within `threshold`.
inline bool may_meet(const FlightPath& a, const FlightPath& b, double threshold) {
  const Vec3 da = a.destination.cell.as_vec();
  const Vec3 db = b.destination.cell.as_vec();
  const auto axis = [&](double a0, double a1, double b0, double b1) {
    return std::min(a0, a1) - threshold <= std::max(b0, b1) && std::min(b0, b1) - threshold <= std::max(a0, a1);
  };
  return axis(a.source.x, da.x, b.source.x, db.x) && axis(a.source.y, da.y, b.source.y, db.y) &&
         axis(a.source.z, da.z, b.source.z, db.z);
}

/// Small random schedule: either a corner-dispatcher deployment of a dense
/// cloud, or free-floating flights with random sources and launch times.
inline DeploymentSchedule random_schedule(std::mt19937_64& rng, std::size_t max_paths = 50) {
  std::uniform_int_distribution<std::size_t> count(2, max_paths);
  const std::size_t n = count(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < 0.5) {
    const Dims dims{8, 8, 8};
    const auto cfg = DisplayConfig::corners8(dims);
    std::vector<Point> pts;
    std::vector<char> used(static_cast<std::size_t>(dims.volume()), 0);
    std::uniform_int_distribution<int> c(0, 7);
    while (pts.size() < n) {
      const Cell cell{c(rng), c(rng), c(rng)};
      const auto key = static_cast<std::size_t>((cell.x * 8 + cell.y) * 8 + cell.z);
      if (used[key]) continue;
      used[key] = 1;
      pts.push_back({cell});
    }
    const PointCloud cloud(std::move(pts));
    const auto plan = u(rng) < 0.5 ? min_dist_assign(cloud, cfg) : quota_balanced_assign(cloud, cfg);
    return order_deployments(plan, cfg);
  }
  DeploymentSchedule s;
  std::uniform_int_distribution<int> c(0, 9);
  std::uniform_real_distribution<double> launch(0.0, 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 src{u(rng) * 10.0, u(rng) * 10.0, u(rng) * 10.0};
    s.paths.push_back(FlightPath::make(src, Point{{c(rng), c(rng), c(rng)}}, launch(rng), 4.0));
  }
  return s;
}

}  // namespace flsplan::testkit
