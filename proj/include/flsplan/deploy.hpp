#pragma once

// Static illuminations: assign every point of a cloud to a dispatcher, order
// each dispatcher's launches, and measure latency and distance.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "flsplan/model.hpp"

namespace flsplan {

enum class Assigner { MinDist, QuotaBalanced };

inline std::string to_string(Assigner a) { return a == Assigner::MinDist ? "mindist" : "quota"; }

namespace detail {

inline void require_inventory(const PointCloud& cloud, const DisplayConfig& config) {
  std::size_t total = 0;
  for (const auto& d : config.dispatchers) {
    if (d.unbounded()) return;
    total += *d.inventory;
  }
  if (total < cloud.size()) {
    throw InfeasibleError("dispatchers hold " + std::to_string(total) + " FLSs but the cloud has " +
                          std::to_string(cloud.size()) + " points");
  }
}

}  // namespace detail

/// Assigns each point to its nearest dispatcher (lowest id on ties). With
/// finite inventories a full dispatcher is skipped and the point goes to the
/// nearest dispatcher that still has FLSs; such points are counted in
/// inventory_fallbacks.
inline DeploymentPlan min_dist_assign(const PointCloud& cloud, const DisplayConfig& config) {
  config.validate();
  detail::require_inventory(cloud, config);

  const std::size_t psi = config.dispatchers.size();
  DeploymentPlan plan;
  plan.algorithm = "mindist";
  plan.assignments.resize(psi);

  std::vector<std::size_t> remaining(psi, std::numeric_limits<std::size_t>::max());
  for (std::size_t j = 0; j < psi; ++j) {
    if (!config.dispatchers[j].unbounded()) remaining[j] = *config.dispatchers[j].inventory;
  }

  for (const auto& point : cloud) {
    const Vec3 p = point.cell.as_vec();
    double best_any = std::numeric_limits<double>::infinity();
    std::size_t target_any = 0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t target = psi;
    for (std::size_t j = 0; j < psi; ++j) {
      const double d = euclidean_distance(p, config.dispatchers[j].position);
      if (d < best_any) {
        best_any = d;
        target_any = j;
      }
      if (remaining[j] > 0 && d < best) {
        best = d;
        target = j;
      }
    }
    if (target == psi) throw InfeasibleError("all dispatcher inventories exhausted");
    if (target != target_any) ++plan.inventory_fallbacks;
    plan.assignments[target].push_back(point);
    if (!config.dispatchers[target].unbounded()) --remaining[target];
  }
  return plan;
}

/// Balances deployments by giving each dispatcher a time quota of
/// α/(ψ·f) seconds. A point goes to the nearest active dispatcher, whose
/// quota drops by the FLS travel time. A dispatcher is active while it has
/// quota left and FLSs in its inventory; one without FLSs never returns.
/// When no dispatcher is active the quotas of all dispatchers with FLSs are
/// reset to remaining/(ψ'·f) and counted in quota_resets.
inline DeploymentPlan quota_balanced_assign(const PointCloud& cloud, const DisplayConfig& config) {
  config.validate();
  detail::require_inventory(cloud, config);

  const std::size_t psi = config.dispatchers.size();
  const std::size_t alpha = cloud.size();
  const double f = config.deploy_rate;
  const double speed = config.fls_speed;

  DeploymentPlan plan;
  plan.algorithm = "quota";
  plan.assignments.resize(psi);

  std::vector<std::size_t> inventory(psi, std::numeric_limits<std::size_t>::max());
  for (std::size_t j = 0; j < psi; ++j) {
    if (!config.dispatchers[j].unbounded()) inventory[j] = *config.dispatchers[j].inventory;
  }
  std::vector<double> quota(psi, static_cast<double>(alpha) / (static_cast<double>(psi) * f));
  std::vector<char> active(psi);
  std::size_t active_count = 0;
  for (std::size_t j = 0; j < psi; ++j) {
    active[j] = inventory[j] > 0 && quota[j] > 0.0;
    active_count += active[j] ? 1 : 0;
  }

  for (std::size_t i = 0; i < alpha; ++i) {
    if (active_count == 0) {
      std::size_t stocked = 0;
      for (std::size_t j = 0; j < psi; ++j) stocked += inventory[j] > 0 ? 1 : 0;
      if (stocked == 0) throw InfeasibleError("all dispatcher inventories exhausted");
      const double reset =
          static_cast<double>(alpha - i) / (static_cast<double>(stocked) * f);
      for (std::size_t j = 0; j < psi; ++j) {
        if (inventory[j] == 0) continue;
        quota[j] = reset;
        active[j] = 1;
        ++active_count;
      }
      ++plan.quota_resets;
    }

    const Point& point = cloud[i];
    const Vec3 p = point.cell.as_vec();
    double best = std::numeric_limits<double>::infinity();
    std::size_t target = psi;
    for (std::size_t j = 0; j < psi; ++j) {
      if (!active[j]) continue;
      const double d = euclidean_distance(p, config.dispatchers[j].position);
      if (d < best) {
        best = d;
        target = j;
      }
    }

    plan.assignments[target].push_back(point);
    quota[target] -= best / speed;
    if (!config.dispatchers[target].unbounded()) --inventory[target];
    if (inventory[target] == 0 || quota[target] <= 0.0) {
      active[target] = 0;
      --active_count;
    }
  }
  return plan;
}

inline DeploymentPlan assign(const PointCloud& cloud, const DisplayConfig& config, Assigner algo) {
  return algo == Assigner::MinDist ? min_dist_assign(cloud, config)
                                   : quota_balanced_assign(cloud, config);
}

/// Time-stamped launches for a plan. Paths are grouped by dispatcher id and
/// listed in launch order within a dispatcher.
struct DeploymentSchedule {
  std::vector<FlightPath> paths;

  friend bool operator==(const DeploymentSchedule&, const DeploymentSchedule&) = default;
};

/// Each dispatcher launches its farthest point first, one FLS every 1/f
/// seconds. Equal distances are ordered by cell (x, y, z).
inline DeploymentSchedule order_deployments(const DeploymentPlan& plan,
                                            const DisplayConfig& config) {
  config.validate();
  if (plan.assignments.size() > config.dispatchers.size()) {
    throw ValidationError("plan references more dispatchers than the display has");
  }
  DeploymentSchedule schedule;
  schedule.paths.reserve(plan.point_count());
  for (std::size_t j = 0; j < plan.assignments.size(); ++j) {
    const Dispatcher& dispatcher = config.dispatchers[j];
    std::vector<std::pair<double, Point>> order;
    order.reserve(plan.assignments[j].size());
    for (const auto& p : plan.assignments[j]) {
      order.emplace_back(euclidean_distance(dispatcher.position, p.cell.as_vec()), p);
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second.cell < b.second.cell;
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
      const double launch = static_cast<double>(k) / config.deploy_rate;
      schedule.paths.push_back(FlightPath::make(dispatcher.position, order[k].second, launch,
                                                config.fls_speed, dispatcher.id));
    }
  }
  return schedule;
}

/// Time at which the last FLS reaches its cell; 0 for an empty schedule.
inline double compute_latency(const DeploymentSchedule& schedule) {
  double latency = 0.0;
  for (const auto& p : schedule.paths) latency = std::max(latency, p.arrival_time());
  return latency;
}

inline double total_distance(const DeploymentPlan& plan, const DisplayConfig& config) {
  double sum = 0.0;
  for (std::size_t j = 0; j < plan.assignments.size(); ++j) {
    for (const auto& p : plan.assignments[j]) {
      sum += euclidean_distance(config.dispatchers.at(j).position, p.cell.as_vec());
    }
  }
  return sum;
}

}  // namespace flsplan
