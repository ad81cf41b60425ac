// Deploys one point cloud with both assignment algorithms and prints the
// metrics table. Usage: demo_static [CLOUD.xyz]
//
// Without an argument a table-like cluster is generated near the bottom of a
// 100^3 display, which is where the two algorithms differ most.

#include <chrono>
#include <iostream>
#include <random>
#include <unordered_set>

#include "flsplan/flsplan.hpp"

using namespace flsplan;

namespace {

PointCloud table_cluster() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> x(22, 71), y(0, 19), z(30, 49);
  std::unordered_set<Cell, CellHash> seen;
  std::vector<Point> pts;
  while (pts.size() < 10000) {
    const Cell c{x(rng), y(rng), z(rng)};
    if (seen.insert(c).second) pts.push_back({c, Rgb{200, 140, 60}});
  }
  return PointCloud(std::move(pts));
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const PointCloud cloud = argc > 1 ? io::load_cloud(argv[1]) : table_cluster();
    const DisplayConfig display = DisplayConfig::corners8(Dims{100, 100, 100});
    cloud.check_within(display.dims);

    std::vector<io::MetricsReport> rows;
    for (const Assigner a : {Assigner::MinDist, Assigner::QuotaBalanced}) {
      const auto t0 = std::chrono::steady_clock::now();
      const DeploymentPlan plan = assign(cloud, display, a);
      const DeploymentSchedule schedule = order_deployments(plan, display);
      const std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - t0;
      const ConflictReport conflicts = detect_conflicts(schedule, display.conflict_threshold);
      io::MetricsReport r;
      r.algorithm = to_string(a);
      r.latency_seconds = compute_latency(schedule);
      r.total_distance_cells = total_distance(plan, display);
      r.intersecting_paths = conflicts.intersecting.size();
      r.conflicts = conflicts.conflicts.size();
      r.execution_time_ms = ms.count();
      r.dispatcher_counts = plan.counts();
      r.quota_resets = plan.quota_resets;
      rows.push_back(r);
    }
    io::write_metrics_csv(std::cout, rows);
    std::cout << "latency ratio mindist/quota: " << rows[0].latency_seconds / rows[1].latency_seconds << "\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
