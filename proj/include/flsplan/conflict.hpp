#pragma once

// Geometric intersection and temporal conflict detection for scheduled
// flight paths, plus delay-based conflict resolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flsplan/deploy.hpp"
#include "flsplan/model.hpp"
#include "flsplan/parallel.hpp"

namespace flsplan {

/// Closest approach between segments [p1,q1] and [p2,q2]; s and t are the
/// segment parameters in [0,1].
struct SegmentApproach {
  double distance{0.0};
  double s{0.0};
  double t{0.0};
  Vec3 on_first;
  Vec3 on_second;
};

inline SegmentApproach closest_approach(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                        const Vec3& q2) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.dot(d1);
  const double e = d2.dot(d2);
  const double f = d2.dot(r);
  const auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

  double s = 0.0;
  double t = 0.0;
  if (a <= 0.0 && e <= 0.0) {
    // both degenerate
  } else if (a <= 0.0) {
    t = clamp01(f / e);
  } else {
    const double c = d1.dot(r);
    if (e <= 0.0) {
      s = clamp01(-c / a);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      // Near-parallel segments: any s works, start from 0 and let the
      // clamping below find the true minimum.
      s = denom > 1e-12 * a * e ? clamp01((b * f - c * e) / denom) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = clamp01(-c / a);
      } else if (t > 1.0) {
        t = 1.0;
        s = clamp01((b - c) / a);
      }
    }
  }
  SegmentApproach out;
  out.s = s;
  out.t = t;
  out.on_first = p1 + d1 * s;
  out.on_second = p2 + d2 * t;
  out.distance = euclidean_distance(out.on_first, out.on_second);
  return out;
}

/// Distance from point p to segment [a,b].
inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  return closest_approach(p, p, a, b).distance;
}

/// Position of an FLS on its path at time t, clamped to the endpoints.
inline Vec3 position_at(const FlightPath& path, double t) {
  const Vec3 dst = path.destination.cell.as_vec();
  if (!(path.travel_time > 0.0)) return path.source;
  const double frac = std::clamp((t - path.launch_time) / path.travel_time, 0.0, 1.0);
  return path.source + (dst - path.source) * frac;
}

struct TemporalApproach {
  double distance{0.0};
  double time{0.0};
};

/// Minimum separation of two FLSs while both are in flight, or nothing when
/// their flight windows do not overlap. Closed-form minimisation of the
/// quadratic |r(t)|^2 over the shared window.
inline std::optional<TemporalApproach> temporal_approach(const FlightPath& a,
                                                         const FlightPath& b) {
  const double lo = std::max(a.launch_time, b.launch_time);
  const double hi = std::min(a.arrival_time(), b.arrival_time());
  if (lo > hi) return std::nullopt;

  const auto velocity = [](const FlightPath& p) {
    if (!(p.travel_time > 0.0)) return Vec3{};
    return (p.destination.cell.as_vec() - p.source) * (1.0 / p.travel_time);
  };
  const Vec3 r0 = position_at(a, lo) - position_at(b, lo);
  const Vec3 w = velocity(a) - velocity(b);
  const double ww = w.dot(w);
  double tau = 0.0;
  if (ww > 0.0) tau = std::clamp(-r0.dot(w) / ww, 0.0, hi - lo);
  return TemporalApproach{(r0 + w * tau).norm(), lo + tau};
}

struct PathPair {
  std::size_t first{0};
  std::size_t second{0};
  Vec3 closest;            ///< midpoint of the closest approach
  double separation{0.0};  ///< geometric (intersections) or in-flight (conflicts) distance

  friend bool operator==(const PathPair&, const PathPair&) = default;
};

struct ConflictReport {
  std::vector<PathPair> intersecting;
  std::vector<PathPair> conflicts;  ///< subset of intersecting
  double threshold{0.0};
};

enum class BroadPhase { Automatic, Exhaustive, SpatialHash };

struct DetectOptions {
  BroadPhase broad_phase{BroadPhase::Automatic};
  std::size_t workers{1};
  std::size_t hash_cutoff{5000};  ///< Automatic switches to hashing above this many paths
};

namespace detail {

struct Box3 {
  Vec3 lo;
  Vec3 hi;
};

inline Box3 path_box(const FlightPath& p, double pad) {
  const Vec3 d = p.destination.cell.as_vec();
  return {Vec3{std::min(p.source.x, d.x) - pad, std::min(p.source.y, d.y) - pad,
               std::min(p.source.z, d.z) - pad},
          Vec3{std::max(p.source.x, d.x) + pad, std::max(p.source.y, d.y) + pad,
               std::max(p.source.z, d.z) + pad}};
}

inline bool boxes_overlap(const Box3& a, const Box3& b) {
  return a.lo.x <= b.hi.x && b.lo.x <= a.hi.x && a.lo.y <= b.hi.y && b.lo.y <= a.hi.y &&
         a.lo.z <= b.hi.z && b.lo.z <= a.hi.z;
}

/// Exact geometric test for one pair. Paths leaving the same source always
/// touch there; they only count when they overlap beyond it, i.e. one
/// destination lies within the threshold of the other path.
inline std::optional<PathPair> intersect_pair(const std::vector<FlightPath>& paths, std::size_t i,
                                              std::size_t j, double threshold) {
  const FlightPath& a = paths[i];
  const FlightPath& b = paths[j];
  const Vec3 da = a.destination.cell.as_vec();
  const Vec3 db = b.destination.cell.as_vec();
  if (a.source == b.source) {
    const double to_b = point_segment_distance(da, b.source, db);
    const double to_a = point_segment_distance(db, a.source, da);
    const double sep = std::min(to_b, to_a);
    if (sep > threshold) return std::nullopt;
    return PathPair{i, j, to_b <= to_a ? da : db, sep};
  }
  const SegmentApproach ap = closest_approach(a.source, da, b.source, db);
  if (ap.distance > threshold) return std::nullopt;
  return PathPair{i, j, (ap.on_first + ap.on_second) * 0.5, ap.distance};
}

inline void sort_pairs(std::vector<PathPair>& pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const PathPair& x, const PathPair& y) {
    return x.first != y.first ? x.first < y.first : x.second < y.second;
  });
}

inline std::vector<PathPair> intersections_exhaustive(const std::vector<FlightPath>& paths,
                                                      double threshold, std::size_t workers) {
  const std::size_t m = paths.size();
  std::vector<Box3> boxes(m);
  for (std::size_t i = 0; i < m; ++i) boxes[i] = path_box(paths[i], threshold * 0.5);
  std::vector<std::vector<PathPair>> rows(m);
  parallel_for(m, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (!boxes_overlap(boxes[i], boxes[j])) continue;
      if (auto hit = intersect_pair(paths, i, j, threshold)) rows[i].push_back(*hit);
    }
  });
  std::vector<PathPair> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

/// Uniform grid over padded path boxes. A pair is examined only in the
/// lowest grid cell shared by both boxes, so each candidate is seen once.
inline std::vector<PathPair> intersections_hashed(const std::vector<FlightPath>& paths,
                                                  double threshold, std::size_t workers) {
  const std::size_t m = paths.size();
  if (m < 2) return {};
  std::vector<Box3> boxes(m);
  Box3 world = path_box(paths[0], threshold * 0.5);
  for (std::size_t i = 0; i < m; ++i) {
    boxes[i] = path_box(paths[i], threshold * 0.5);
    world.lo = Vec3{std::min(world.lo.x, boxes[i].lo.x), std::min(world.lo.y, boxes[i].lo.y),
                    std::min(world.lo.z, boxes[i].lo.z)};
    world.hi = Vec3{std::max(world.hi.x, boxes[i].hi.x), std::max(world.hi.y, boxes[i].hi.y),
                    std::max(world.hi.z, boxes[i].hi.z)};
  }
  const double span = std::max({world.hi.x - world.lo.x, world.hi.y - world.lo.y,
                                world.hi.z - world.lo.z, 1.0});
  const double h = std::max(2.0 * threshold, span / 16.0);
  const auto index = [&](double v, double lo) {
    return static_cast<int>(std::floor((v - lo) / h));
  };
  const int nx = index(world.hi.x, world.lo.x) + 1;
  const int ny = index(world.hi.y, world.lo.y) + 1;
  const int nz = index(world.hi.z, world.lo.z) + 1;

  std::vector<std::array<int, 6>> range(m);
  std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(nx) * ny * nz);
  const auto flat = [&](int x, int y, int z) {
    return (static_cast<std::size_t>(x) * ny + y) * nz + z;
  };
  for (std::size_t i = 0; i < m; ++i) {
    const Box3& b = boxes[i];
    range[i] = {index(b.lo.x, world.lo.x), index(b.lo.y, world.lo.y), index(b.lo.z, world.lo.z),
                index(b.hi.x, world.lo.x), index(b.hi.y, world.lo.y), index(b.hi.z, world.lo.z)};
    for (int x = range[i][0]; x <= range[i][3]; ++x)
      for (int y = range[i][1]; y <= range[i][4]; ++y)
        for (int z = range[i][2]; z <= range[i][5]; ++z) buckets[flat(x, y, z)].push_back(i);
  }

  std::vector<std::vector<PathPair>> found(buckets.size());
  parallel_for(buckets.size(), workers, [&](std::size_t c) {
    const auto& bucket = buckets[c];
    if (bucket.size() < 2) return;
    const int cx = static_cast<int>(c / (static_cast<std::size_t>(ny) * nz));
    const int cy = static_cast<int>((c / nz) % ny);
    const int cz = static_cast<int>(c % nz);
    for (std::size_t u = 0; u < bucket.size(); ++u) {
      for (std::size_t v = u + 1; v < bucket.size(); ++v) {
        const std::size_t i = std::min(bucket[u], bucket[v]);
        const std::size_t j = std::max(bucket[u], bucket[v]);
        const auto& ri = range[i];
        const auto& rj = range[j];
        if (std::max(ri[0], rj[0]) != cx || std::max(ri[1], rj[1]) != cy ||
            std::max(ri[2], rj[2]) != cz) {
          continue;
        }
        if (!boxes_overlap(boxes[i], boxes[j])) continue;
        if (auto hit = intersect_pair(paths, i, j, threshold)) found[c].push_back(*hit);
      }
    }
  });
  std::vector<PathPair> out;
  for (auto& f : found) out.insert(out.end(), f.begin(), f.end());
  return out;
}

}  // namespace detail

/// Pairs of paths whose segments come within `threshold` cells (closed
/// comparison). Output sorted by (first, second).
inline ConflictReport detect_intersections(const DeploymentSchedule& schedule, double threshold,
                                           const DetectOptions& options = {}) {
  if (!(threshold > 0.0)) throw ValidationError("conflict threshold must be positive");
  ConflictReport report;
  report.threshold = threshold;
  const bool hashed =
      options.broad_phase == BroadPhase::SpatialHash ||
      (options.broad_phase == BroadPhase::Automatic && schedule.paths.size() > options.hash_cutoff);
  report.intersecting =
      hashed ? detail::intersections_hashed(schedule.paths, threshold, options.workers)
             : detail::intersections_exhaustive(schedule.paths, threshold, options.workers);
  detail::sort_pairs(report.intersecting);
  return report;
}

/// Re-evaluates the temporal part for already-known intersecting pairs.
inline std::vector<PathPair> conflicts_among(const std::vector<FlightPath>& paths,
                                             const std::vector<PathPair>& intersecting,
                                             double threshold) {
  std::vector<PathPair> out;
  for (const auto& pair : intersecting) {
    const auto ap = temporal_approach(paths[pair.first], paths[pair.second]);
    if (!ap || ap->distance > threshold) continue;
    const Vec3 mid =
        (position_at(paths[pair.first], ap->time) + position_at(paths[pair.second], ap->time)) *
        0.5;
    out.push_back(PathPair{pair.first, pair.second, mid, ap->distance});
  }
  return out;
}

/// Intersecting pairs plus those whose FLSs are within `threshold` of each
/// other at some instant while both are flying.
inline ConflictReport detect_conflicts(const DeploymentSchedule& schedule, double threshold,
                                       const DetectOptions& options = {}) {
  ConflictReport report = detect_intersections(schedule, threshold, options);
  report.conflicts = conflicts_among(schedule.paths, report.intersecting, threshold);
  return report;
}

struct Resolution {
  DeploymentSchedule schedule;
  std::size_t rounds{0};
};

/// Delays conflicting launches until no conflict remains. Each round takes
/// the conflict whose later FLS launches first and shifts that launch, and
/// every later launch of the same dispatcher, by the other FLS's travel
/// time. Gives up after one round per path.
inline Resolution resolve_by_delay(const DeploymentSchedule& schedule,
                                   const ConflictReport& report) {
  Resolution out{schedule, 0};
  auto& paths = out.schedule.paths;
  const std::size_t cap = std::max<std::size_t>(paths.size(), 1);
  for (;;) {
    const auto conflicts = conflicts_among(paths, report.intersecting, report.threshold);
    if (conflicts.empty()) break;
    if (out.rounds == cap) {
      throw Error("conflict resolution did not converge after " + std::to_string(cap) +
                  " rounds; " + std::to_string(conflicts.size()) + " conflicts remain");
    }

    const auto later_of = [&](const PathPair& p) {
      const FlightPath& a = paths[p.first];
      const FlightPath& b = paths[p.second];
      return a.launch_time > b.launch_time ? p.first : p.second;
    };
    const PathPair* pick = &conflicts.front();
    for (const auto& c : conflicts) {
      if (paths[later_of(c)].launch_time < paths[later_of(*pick)].launch_time) pick = &c;
    }
    const std::size_t late = later_of(*pick);
    const std::size_t early = late == pick->first ? pick->second : pick->first;
    // A zero-length path still needs a strictly positive nudge.
    const double shift = std::max(paths[early].travel_time, 1e-6);
    const double from = paths[late].launch_time;
    const int dispatcher = paths[late].dispatcher_id;
    for (std::size_t k = 0; k < paths.size(); ++k) {
      const bool same_line = dispatcher != 0 && paths[k].dispatcher_id == dispatcher &&
                             paths[k].launch_time >= from;
      if (k == late || same_line) paths[k].launch_time += shift;
    }
    ++out.rounds;
  }
  return out;
}

}  // namespace flsplan
