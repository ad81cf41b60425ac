// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "support/conflict_oracle.hpp"
#include "support/generators.hpp"

using namespace flsplan;
using flsplan::testkit::Rng;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok{true};
  std::string note;

  void fail(const std::string& why) {
    if (ok) note = why;
    ok = false;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Point> pts(std::initializer_list<Cell> cells) {
  std::vector<Point> out;
  for (const auto& c : cells) out.push_back({c});
  return out;
}

GpcConfig gpc(Variant v, std::optional<std::size_t> theta, std::optional<std::size_t> omega = std::nullopt) {
  GpcConfig c;
  c.variant = v;
  c.theta = theta;
  c.omega = omega;
  return c;
}

// Scenes shared by criteria 2 and 10.
std::vector<Scene> replay_scenes() {
  Rng rng(20240611);
  std::vector<Scene> out;
  for (int k = 0; k < 200; ++k) out.push_back(testkit::random_scene(rng, Dims{64, 64, 64}));
  return out;
}

const Dims kReplayDims{64, 64, 64};

const std::vector<GpcConfig>& replay_configs() {
  static const std::vector<GpcConfig> configs{gpc(Variant::Simple, std::nullopt), gpc(Variant::Icf, 64),
                                              gpc(Variant::Icl, 64)};
  return configs;
}

Outcome criterion1() {
  Outcome o;
  const auto freed = pts({{3, 0, 0}, {0, 0, 0}});
  const auto vacant = pts({{2, 0, 0}, {5, 0, 0}});
  const auto t0 = Clock::now();
  const auto g = greedy_match(freed, vacant, 4.0);
  const auto m = oracle::optimal_match(freed, vacant);
  const double elapsed = seconds_since(t0);
  double total = 0.0;
  for (const auto& f : g.epsilon) total += f.distance;
  if (total != 6.0) o.fail("greedy total " + std::to_string(total));
  if (m.total != 4.0) o.fail("optimal total " + std::to_string(m.total));
  if (m.assignment != std::vector<std::size_t>{1, 0}) o.fail("optimal assignment is not P1->Q2, P2->Q1");
  if (elapsed >= 1e-3) o.fail("took " + std::to_string(elapsed * 1e3) + " ms");
  o.note += (o.note.empty() ? "" : "; ") + std::string("greedy 6, optimal 4");
  return o;
}

Outcome criterion2(const std::vector<Scene>& scenes) {
  Outcome o;
  const auto display = DisplayConfig::corners8(kReplayDims);
  const auto t0 = Clock::now();
  std::size_t encodings = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (const auto& config : replay_configs()) {
      const auto enc = encode_scene(scenes[s], display, config, Assigner::MinDist);
      ++encodings;
      const auto r = verify_encoding(enc, scenes[s]);
      if (!r.passed) o.fail("scene " + std::to_string(s) + " " + to_string(config.variant) + ": " + r.detail);
      const auto c = testkit::conservation_error(enc, scenes[s]);
      if (!c.empty()) o.fail("scene " + std::to_string(s) + " " + to_string(config.variant) + ": " + c);
    }
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 60.0) o.fail("took " + std::to_string(elapsed) + " s");
  std::ostringstream note;
  note << encodings << " encodings replayed in " << elapsed << " s";
  if (o.ok) o.note = note.str();
  return o;
}

Outcome criterion3() {
  Outcome o;
  Rng rng(33);
  const Dims dims{48, 48, 48};
  const auto display = DisplayConfig::corners8(dims);
  for (int s = 0; s < 50; ++s) {
    const auto scene = testkit::random_scene(rng, dims);
    const auto simple = encode_scene(scene, display, gpc(Variant::Simple, std::nullopt), Assigner::MinDist);
    for (const Variant v : {Variant::Icf, Variant::Icl}) {
      const auto enc = encode_scene(scene, display, gpc(v, std::nullopt), Assigner::MinDist);
      for (std::size_t t = 0; t < simple.transitions.size(); ++t) {
        if (testkit::flight_multiset(enc.transitions[t].epsilon) !=
            testkit::flight_multiset(simple.transitions[t].epsilon)) {
          o.fail("scene " + std::to_string(s) + " " + to_string(v) + " transition " + std::to_string(t));
        }
      }
    }
  }
  if (o.ok) o.note = "50 scenes, ICF and ICL flights equal SIMPLE";
  return o;
}

Outcome criterion4() {
  Outcome o;
  Rng rng(44);
  std::uniform_int_distribution<int> side(8, 60);
  std::uniform_int_distribution<int> layout(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims dims{side(rng), side(rng), side(rng)};
    DisplayConfig cfg;
    switch (layout(rng)) {
      case 0:
        cfg = DisplayConfig::corners8(dims);
        break;
      case 1:
        cfg = DisplayConfig::corners4_bottom(dims);
        break;
      default: {
        cfg.dims = dims;
        std::uniform_int_distribution<int> count(1, 6);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const int n = count(rng);
        for (int j = 0; j < n; ++j) {
          cfg.dispatchers.push_back(
              Dispatcher{j + 1, Vec3{u(rng) * dims.length, u(rng) * dims.height, u(rng) * dims.depth}, std::nullopt});
        }
      }
    }
    const std::size_t cap = static_cast<std::size_t>(dims.volume());
    const std::size_t n = std::min<std::size_t>(cap, std::uniform_int_distribution<std::size_t>(1, 1500)(rng));
    const auto cloud = testkit::random_cloud(rng, n, dims, false);
    const auto md = min_dist_assign(cloud, cfg);
    const auto qb = quota_balanced_assign(cloud, cfg);
    if (total_distance(md, cfg) > total_distance(qb, cfg)) o.fail("trial " + std::to_string(trial) + ": MinDist longer");
    for (std::size_t j = 0; j < md.assignments.size(); ++j) {
      for (const auto& p : md.assignments[j]) {
        const Vec3 v = p.cell.as_vec();
        const double mine = euclidean_distance(v, cfg.dispatchers[j].position);
        for (const auto& d : cfg.dispatchers) {
          if (euclidean_distance(v, d.position) < mine) {
            o.fail("trial " + std::to_string(trial) + ": point " + to_string(p.cell) + " not at its nearest dispatcher");
          }
        }
      }
    }
  }
  if (o.ok) o.note = "100 configurations";
  return o;
}

Outcome criterion5() {
  Outcome o;
  Rng rng(55);
  std::uniform_int_distribution<int> ndisp(1, 3);
  std::uniform_real_distribution<double> rate(0.5, 20.0);
  std::uniform_real_distribution<double> speed(0.5, 10.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Dims dims{40, 40, 40};
  for (int trial = 0; trial < 500; ++trial) {
    DisplayConfig cfg;
    cfg.dims = dims;
    cfg.deploy_rate = rate(rng);
    cfg.fls_speed = speed(rng);
    const int k = ndisp(rng);
    for (int j = 0; j < k; ++j) {
      cfg.dispatchers.push_back(Dispatcher{j + 1, Vec3{u(rng) * 40, u(rng) * 40, u(rng) * 40}, std::nullopt});
    }
    DeploymentPlan plan;
    plan.assignments.resize(static_cast<std::size_t>(k));
    const auto n = std::uniform_int_distribution<std::size_t>(1, 7)(rng);
    const auto cloud = testkit::random_cloud(rng, n, dims, false);
    std::uniform_int_distribution<int> which(0, k - 1);
    for (const auto& p : cloud) plan.assignments[static_cast<std::size_t>(which(rng))].push_back(p);

    double expected = 0.0;
    for (std::size_t j = 0; j < plan.assignments.size(); ++j) {
      std::vector<double> d;
      for (const auto& p : plan.assignments[j])
        d.push_back(euclidean_distance(p.cell.as_vec(), cfg.dispatchers[j].position));
      expected = std::max(expected, oracle::optimal_makespan_order(d, cfg.deploy_rate, cfg.fls_speed).makespan);
    }
    const double got = compute_latency(order_deployments(plan, cfg));
    if (std::abs(got - expected) > 1e-9 * std::max(1.0, expected)) {
      o.fail("trial " + std::to_string(trial) + ": latency " + std::to_string(got) + " vs optimum " +
             std::to_string(expected));
    }
  }
  if (o.ok) o.note = "500 instances";
  return o;
}

// The clustered cloud of criterion 6: 10,000 cells within 20 cells of the
// bottom face, off-center so that one side of the display is nearer.
PointCloud table_cloud() {
  Rng rng(66);
  return testkit::random_cloud(rng, 10000, Cell{22, 0, 30}, Cell{72, 20, 50}, false);
}

struct TableRun {
  DeploymentPlan mindist;
  DeploymentPlan quota;
  DeploymentSchedule mindist_schedule;
  DeploymentSchedule quota_schedule;
};

TableRun run_table(const PointCloud& cloud, const DisplayConfig& cfg) {
  TableRun r;
  r.mindist = min_dist_assign(cloud, cfg);
  r.quota = quota_balanced_assign(cloud, cfg);
  r.mindist_schedule = order_deployments(r.mindist, cfg);
  r.quota_schedule = order_deployments(r.quota, cfg);
  return r;
}

std::size_t used_dispatchers(const DeploymentPlan& plan) {
  std::size_t n = 0;
  for (const auto& a : plan.assignments) n += a.empty() ? 0 : 1;
  return n;
}

Outcome criterion6() {
  Outcome o;
  const auto cloud = table_cloud();
  const auto cfg = DisplayConfig::corners8(Dims{100, 100, 100}, 10.0, 4.0);
  const auto t0 = Clock::now();
  const auto r = run_table(cloud, cfg);
  const double lat_md = compute_latency(r.mindist_schedule);
  const double lat_qb = compute_latency(r.quota_schedule);
  const double dist_md = total_distance(r.mindist, cfg);
  const double dist_qb = total_distance(r.quota, cfg);
  const double elapsed = seconds_since(t0);
  if (used_dispatchers(r.mindist) != 2) o.fail("MinDist used " + std::to_string(used_dispatchers(r.mindist)) + " dispatchers");
  if (used_dispatchers(r.quota) != 8) o.fail("QuotaBalanced used " + std::to_string(used_dispatchers(r.quota)) + " dispatchers");
  if (!(lat_qb <= lat_md / 3.0)) o.fail("latency ratio " + std::to_string(lat_md / lat_qb));
  if (!(dist_qb >= dist_md)) o.fail("QuotaBalanced distance below MinDist");
  if (elapsed >= 5.0) o.fail("took " + std::to_string(elapsed) + " s");
  if (o.ok) {
    std::ostringstream note;
    note << "latency " << lat_md << " s vs " << lat_qb << " s (x" << lat_md / lat_qb << "), distance " << dist_md
         << " vs " << dist_qb << ", resets " << r.quota.quota_resets;
    o.note = note.str();
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  Rng rng(77);
  const double thr = 0.2;
  const double dt = 0.001 / 10.0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = testkit::random_schedule(rng, 50);
    const auto report = detect_conflicts(s, thr);
    std::set<std::pair<std::size_t, std::size_t>> inter;
    std::set<std::pair<std::size_t, std::size_t>> conf;
    for (const auto& p : report.intersecting) inter.insert({p.first, p.second});
    for (const auto& p : report.conflicts) conf.insert({p.first, p.second});
    for (const auto& p : conf)
      if (!inter.count(p)) o.fail("trial " + std::to_string(trial) + ": conflict without intersection");
    for (std::size_t i = 0; i < s.paths.size(); ++i)
      for (std::size_t j = i + 1; j < s.paths.size(); ++j) {
        const auto sep = testkit::may_meet(s.paths[i], s.paths[j], thr)
                             ? testkit::sampled_min_separation(s.paths[i], s.paths[j], dt)
                             : std::nullopt;
        if (sep && std::abs(*sep - thr) <= 1e-6) continue;
        ++compared;
        const bool oracle = sep && *sep <= thr;
        if (oracle != (conf.count({i, j}) == 1)) {
          o.fail("trial " + std::to_string(trial) + ": pair " + std::to_string(i) + "," + std::to_string(j) +
                 " disagrees with sampling");
        }
      }
    const auto fixed = resolve_by_delay(s, report);
    if (!detect_conflicts(fixed.schedule, thr).conflicts.empty()) o.fail("trial " + std::to_string(trial) + ": conflicts remain");
    if (compute_latency(fixed.schedule) < compute_latency(s)) o.fail("trial " + std::to_string(trial) + ": latency decreased");
  }
  if (o.ok) o.note = std::to_string(compared) + " pairs checked against sampling";
  return o;
}

bool share_face(const Box& a, const Box& b) {
  for (std::size_t axis = 0; axis < 3; ++axis) {
    if (a.hi[axis] != b.lo[axis] && b.hi[axis] != a.lo[axis]) continue;
    bool overlap = true;
    for (std::size_t k = 0; k < 3; ++k)
      if (k != axis && std::max(a.lo[k], b.lo[k]) >= std::min(a.hi[k], b.hi[k])) overlap = false;
    if (overlap) return true;
  }
  return false;
}

Outcome criterion8() {
  Outcome o;
  Rng rng(88);
  std::uniform_int_distribution<int> side(6, 24);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims dims{side(rng), side(rng), side(rng)};
    const auto n = std::uniform_int_distribution<std::size_t>(
        1, std::min<std::size_t>(600, static_cast<std::size_t>(dims.volume())))(rng);
    const auto cloud = testkit::random_cloud(rng, n, dims);
    for (const std::size_t theta : {4u, 16u, 128u}) {
      const auto tag = "cloud " + std::to_string(trial) + " theta " + std::to_string(theta);
      const Grid g = build_grid(cloud, dims, theta);
      std::vector<std::size_t> holders(static_cast<std::size_t>(dims.volume()), 0);
      for (const auto& c : g.cuboids())
        for (int x = c.bounds.lo[0]; x < c.bounds.hi[0]; ++x)
          for (int y = c.bounds.lo[1]; y < c.bounds.hi[1]; ++y)
            for (int z = c.bounds.lo[2]; z < c.bounds.hi[2]; ++z)
              ++holders[static_cast<std::size_t>((x * dims.height + y) * dims.depth + z)];
      if (std::any_of(holders.begin(), holders.end(), [](std::size_t h) { return h != 1; }))
        o.fail(tag + ": cuboids do not tile the volume");
      const auto occ = populate_grid(g, cloud);
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (occ.counts[j] > theta) o.fail(tag + ": cuboid over capacity");
      }
      for (std::size_t i = 0; i < cloud.size(); ++i)
        if (!g.cuboids()[occ.cuboid_of[i]].bounds.contains(cloud[i].cell)) o.fail(tag + ": point in wrong cuboid");
      for (std::size_t a = 0; a < g.size(); ++a) {
        const auto& na = g.neighbors(a);
        for (std::size_t b = 0; b < g.size(); ++b) {
          const bool listed = std::binary_search(na.begin(), na.end(), b);
          const auto& nb = g.neighbors(b);
          const bool back = std::binary_search(nb.begin(), nb.end(), a);
          if (listed != back) o.fail(tag + ": neighbor relation not symmetric");
          if (listed != (a != b && share_face(g.cuboids()[a].bounds, g.cuboids()[b].bounds)))
            o.fail(tag + ": neighbor relation differs from brute force");
        }
      }
    }
  }
  if (o.ok) o.note = "300 grids";
  return o;
}

Outcome criterion9() {
  Outcome o;
  Rng rng(99);
  const Dims dims{48, 48, 48};
  const auto display = DisplayConfig::corners8(dims);
  for (int s = 0; s < 50; ++s) {
    testkit::SceneShape shape;
    shape.min_clouds = 4;
    shape.max_points = 600;
    const auto scene = testkit::random_scene(rng, dims, shape);
    const std::size_t n = scene.clouds.size();
    const auto mono = encode_scene(scene, display, gpc(Variant::Icf, 32, n), Assigner::MinDist);
    const auto fused = encode_scene(scene, display, gpc(Variant::Icf, 32, n / 2), Assigner::MinDist);
    for (const auto* enc : {&mono, &fused}) {
      const auto r = verify_encoding(*enc, scene);
      if (!r.passed) o.fail("scene " + std::to_string(s) + ": " + r.detail);
      const auto c = testkit::conservation_error(*enc, scene);
      if (!c.empty()) o.fail("scene " + std::to_string(s) + ": " + c);
    }
    if (final_state(mono) != final_state(fused)) o.fail("scene " + std::to_string(s) + ": final states differ");
  }
  if (o.ok) o.note = "50 scenes, grouped and monolithic both replay";
  return o;
}

Outcome criterion10(const std::vector<Scene>& scenes) {
  Outcome o;
  const auto display = DisplayConfig::corners8(kReplayDims);
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (const auto& config : replay_configs()) {
      std::string first;
      for (const std::size_t w : {1u, 4u, 8u}) {
        const auto text =
            io::encoding_to_json(encode_scene(scenes[s], display, config, Assigner::MinDist, w), display.fls_speed).dump();
        if (first.empty()) {
          first = text;
        } else if (text != first) {
          o.fail("scene " + std::to_string(s) + " " + to_string(config.variant) + " differs at " + std::to_string(w) +
                 " workers");
        }
      }
    }
  }
  const auto cloud = table_cloud();
  const auto cfg = DisplayConfig::corners8(Dims{100, 100, 100}, 10.0, 4.0);
  std::string first;
  for (const std::size_t w : {1u, 4u, 8u}) {
    const auto r = run_table(cloud, cfg);
    DetectOptions opts;
    opts.workers = w;
    io::Json doc;
    doc["mindist"] = io::schedule_to_json(r.mindist_schedule);
    doc["quota"] = io::schedule_to_json(r.quota_schedule);
    doc["mindist_conflicts"] = io::conflicts_to_json(detect_conflicts(r.mindist_schedule, cfg.conflict_threshold, opts));
    doc["quota_conflicts"] = io::conflicts_to_json(detect_conflicts(r.quota_schedule, cfg.conflict_threshold, opts));
    const auto text = doc.dump();
    if (first.empty()) {
      first = text;
    } else if (text != first) {
      o.fail("desk-scale plan differs at " + std::to_string(w) + " workers");
    }
  }
  if (o.ok) o.note = "workers 1, 4, 8 byte-identical";
  return o;
}

}  // namespace

int main() {
  const auto scenes = replay_scenes();
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"greedy non-optimality golden case", criterion1},
      {"replay and conservation", [&] { return criterion2(scenes); }},
      {"unbounded capacity emulates SIMPLE", criterion3},
      {"MinDist lower bound and argmin", criterion4},
      {"deployment order optimal makespan", criterion5},
      {"clustered cloud, 2 vs 8 dispatchers", criterion6},
      {"conflict detector vs sampling", criterion7},
      {"grid validity", criterion8},
      {"group fusion", criterion9},
      {"determinism across worker counts", [&] { return criterion10(scenes); }},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %zu: %s (%s)\n", o.ok ? "PASS" : "FAIL", k + 1, criteria[k].first, o.note.c_str());
    std::fflush(stdout);
    failures += o.ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
