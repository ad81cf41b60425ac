#pragma once

// Motion illuminations: turn a sequence of point clouds into per-transition
// flight paths, color changes, recalls and fresh deployments.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flsplan/deploy.hpp"
#include "flsplan/greedy.hpp"
#include "flsplan/grid.hpp"
#include "flsplan/model.hpp"
#include "flsplan/parallel.hpp"

namespace flsplan {

enum class Variant { Simple, Icf, Icl };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Simple: return "simple";
    case Variant::Icf: return "icf";
    case Variant::Icl: return "icl";
  }
  return "?";
}

/// Group-of-point-clouds settings. SIMPLE always runs with one cuboid.
struct GpcConfig {
  std::optional<std::size_t> omega;  ///< clouds per group; default: whole scene
  std::optional<std::size_t> theta;  ///< cuboid capacity; nullopt: unbounded
  Variant variant{Variant::Icf};

  void validate(std::size_t clouds) const {
    if (omega && (*omega == 0 || *omega > clouds)) {
      throw ValidationError("group size must be in 1.." + std::to_string(clouds));
    }
    if (theta && *theta == 0) throw ValidationError("cuboid capacity must be at least 1");
    if (variant == Variant::Simple && theta) {
      throw ValidationError("SIMPLE runs with an unbounded cuboid capacity");
    }
  }
};

struct CloudDiff {
  std::vector<Point> unchanged;
  std::vector<ColorChange> gamma;
  std::vector<Point> delta;  ///< points of the current cloud with no match in the next
  std::vector<Point> mu;     ///< points of the next cloud with no match in the current
};

namespace detail {

struct DiffIndex {
  std::size_t unchanged{0};
  std::vector<ColorChange> gamma;
  std::vector<std::size_t> delta;  ///< indices into current
  std::vector<std::size_t> mu;     ///< indices into next
};

/// Hash the current cloud's cells, probe with the next cloud and delete each
/// matched entry; what remains in the table is the freed set.
inline DiffIndex diff_index(const PointCloud& current, const PointCloud& next) {
  std::unordered_map<Cell, std::size_t, CellHash> table;
  table.reserve(current.size() * 2);
  for (std::size_t i = 0; i < current.size(); ++i) table.emplace(current[i].cell, i);

  DiffIndex out;
  for (std::size_t k = 0; k < next.size(); ++k) {
    const auto it = table.find(next[k].cell);
    if (it == table.end()) {
      out.mu.push_back(k);
      continue;
    }
    const Point& before = current[it->second];
    if (before.color == next[k].color) {
      ++out.unchanged;
    } else {
      out.gamma.push_back(ColorChange{before.cell, before.color, next[k].color});
    }
    table.erase(it);
  }
  for (const auto& [cell, i] : table) out.delta.push_back(i);
  std::sort(out.delta.begin(), out.delta.end());
  std::sort(out.gamma.begin(), out.gamma.end());
  return out;
}

inline bool by_cell(const Point& a, const Point& b) { return a.cell < b.cell; }

}  // namespace detail

inline CloudDiff diff_clouds(const PointCloud& current, const PointCloud& next) {
  const auto idx = detail::diff_index(current, next);
  CloudDiff out;
  out.gamma = idx.gamma;
  for (const std::size_t i : idx.delta) out.delta.push_back(current[i]);
  for (const std::size_t k : idx.mu) out.mu.push_back(next[k]);
  std::unordered_map<Cell, const Point*, CellHash> moved;
  for (const auto& p : out.delta) moved.emplace(p.cell, &p);
  std::unordered_map<Cell, char, CellHash> recolored;
  for (const auto& g : out.gamma) recolored.emplace(g.cell, 1);
  for (const auto& p : current) {
    if (!moved.contains(p.cell) && !recolored.contains(p.cell)) out.unchanged.push_back(p);
  }
  return out;
}

/// Step 1 of SIMPLE: diff, then one greedy matching over all freed FLSs and
/// vacant cells. Flights are ordered by source cell.
inline TransitionPlan simple_transition(const PointCloud& current, const PointCloud& next,
                                        double speed) {
  const auto idx = detail::diff_index(current, next);
  std::vector<Point> delta;
  std::vector<Point> mu;
  for (const std::size_t i : idx.delta) delta.push_back(current[i]);
  for (const std::size_t k : idx.mu) mu.push_back(next[k]);

  auto match = greedy_match(delta, mu, speed);
  TransitionPlan plan;
  plan.unchanged = idx.unchanged;
  plan.gamma = idx.gamma;
  plan.epsilon = std::move(match.epsilon);
  std::sort(plan.epsilon.begin(), plan.epsilon.end(), [](const FlightPath& a, const FlightPath& b) {
    return std::tie(a.source.x, a.source.y, a.source.z) < std::tie(b.source.x, b.source.y, b.source.z);
  });
  plan.delta = std::move(match.freed_left);
  plan.mu = std::move(match.vacant_left);
  return plan;
}

namespace detail {

struct MotillState {
  const PointCloud& current;
  const PointCloud& next;
  const Occupancy& cur_occ;
  const Occupancy& next_occ;
  std::vector<std::vector<std::size_t>> delta_in;  ///< per cuboid, sorted by cell
  std::vector<std::vector<std::size_t>> mu_in;
  std::vector<char> delta_used;  ///< per current index
  std::vector<char> mu_used;     ///< per next index

  struct Match {
    std::size_t cuboid;
    std::size_t from;  ///< current index
    std::size_t to;    ///< next index
  };
  std::vector<Match> matches;
};

/// Greedy matching between the given unused freed FLSs and unused vacant
/// cells. Both lists must already be in cell order.
inline std::vector<MotillState::Match> match_lists(
    const MotillState& st, const std::vector<std::size_t>& from,
    const std::vector<std::size_t>& to, const std::function<bool(std::size_t)>& source_open,
    const std::function<PairingStep(std::size_t, std::size_t)>& accept) {
  std::vector<MotillState::Match> out;
  if (from.empty() || to.empty()) return out;
  std::vector<Cell> src;
  std::vector<Cell> dst;
  src.reserve(from.size());
  dst.reserve(to.size());
  for (const std::size_t i : from) src.push_back(st.current[i].cell);
  for (const std::size_t k : to) dst.push_back(st.next[k].cell);
  std::vector<char> used(from.size(), 0);
  PairingHooks hooks;
  hooks.source_open = [&](std::size_t r) {
    return !used[r] && (!source_open || source_open(from[r]));
  };
  ascending_pairs(src, dst, hooks, [&](std::size_t r, std::size_t c) {
    used[r] = 1;
    out.push_back({st.cur_occ.cuboid_of[from[r]], from[r], to[c]});
    return accept ? accept(from[r], to[c]) : PairingStep::Continue;
  });
  return out;
}

inline std::vector<std::size_t> unused(const std::vector<std::size_t>& items,
                                       const std::vector<char>& used) {
  std::vector<std::size_t> out;
  for (const std::size_t i : items)
    if (!used[i]) out.push_back(i);
  return out;
}

inline void commit(MotillState& st, const std::vector<MotillState::Match>& ms) {
  for (const auto& m : ms) {
    st.delta_used[m.from] = 1;
    st.mu_used[m.to] = 1;
    st.matches.push_back(m);
  }
}

inline void intra_phase(MotillState& st, std::size_t workers) {
  const std::size_t rho = st.delta_in.size();
  std::vector<std::vector<MotillState::Match>> local(rho);
  parallel_for(rho, workers, [&](std::size_t j) {
    local[j] = match_lists(st, unused(st.delta_in[j], st.delta_used),
                           unused(st.mu_in[j], st.mu_used), {}, {});
  });
  for (const auto& ms : local) commit(st, ms);
}

/// Cuboids gaining points (C+) take freed FLSs from neighboring cuboids that
/// lose points (C-). A C+ cuboid fills at most its surplus and drains each
/// C- neighbor by at most that neighbor's deficit. C+ cuboids are grouped by
/// a greedy coloring so that cuboids in one group share no C- neighbor;
/// groups run in order, members of a group concurrently.
inline void inter_phase(MotillState& st, const Grid& grid, std::size_t workers) {
  const std::size_t rho = grid.size();
  std::vector<std::int64_t> surplus(rho);
  for (std::size_t j = 0; j < rho; ++j) {
    surplus[j] = static_cast<std::int64_t>(st.next_occ.counts[j]) -
                 static_cast<std::int64_t>(st.cur_occ.counts[j]);
  }
  std::vector<std::int64_t> drain(rho, 0);
  std::vector<std::size_t> plus;
  for (std::size_t j = 0; j < rho; ++j) {
    if (surplus[j] < 0) drain[j] = -surplus[j];
    if (surplus[j] > 0) plus.push_back(j);
  }
  if (plus.empty()) return;

  std::vector<std::vector<std::size_t>> donors(rho);
  for (const std::size_t k : plus) {
    for (const std::size_t m : grid.neighbors(k))
      if (surplus[m] < 0) donors[k].push_back(m);
  }

  std::vector<int> color(rho, -1);
  std::vector<std::vector<std::size_t>> takers(rho);  // C- cuboid -> C+ cuboids using it
  int classes = 0;
  for (const std::size_t k : plus) {
    std::vector<char> taken(static_cast<std::size_t>(classes) + 1, 0);
    for (const std::size_t m : donors[k])
      for (const std::size_t other : takers[m]) taken[static_cast<std::size_t>(color[other])] = 1;
    int c = 0;
    while (taken[static_cast<std::size_t>(c)]) ++c;
    color[k] = c;
    classes = std::max(classes, c + 1);
    for (const std::size_t m : donors[k]) takers[m].push_back(k);
  }

  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> group;
    for (const std::size_t k : plus)
      if (color[k] == c) group.push_back(k);
    std::vector<std::vector<MotillState::Match>> local(group.size());
    parallel_for(group.size(), workers, [&](std::size_t g) {
      const std::size_t k = group[g];
      std::int64_t room = surplus[k];
      std::vector<std::size_t> from;
      for (const std::size_t m : donors[k]) {
        if (drain[m] <= 0) continue;
        for (const std::size_t i : st.delta_in[m])
          if (!st.delta_used[i]) from.push_back(i);
      }
      std::sort(from.begin(), from.end(), [&](std::size_t a, std::size_t b) {
        return st.current[a].cell < st.current[b].cell;
      });
      const auto to = unused(st.mu_in[k], st.mu_used);
      local[g] = match_lists(
          st, from, to,
          [&](std::size_t i) { return drain[st.cur_occ.cuboid_of[i]] > 0; },
          [&](std::size_t i, std::size_t) {
            --drain[st.cur_occ.cuboid_of[i]];
            return --room > 0 ? PairingStep::Continue : PairingStep::Stop;
          });
    });
    for (const auto& ms : local) commit(st, ms);
  }
}

inline void final_phase(MotillState& st) {
  std::vector<std::size_t> from;
  std::vector<std::size_t> to;
  for (const auto& list : st.delta_in)
    for (const std::size_t i : list)
      if (!st.delta_used[i]) from.push_back(i);
  for (const auto& list : st.mu_in)
    for (const std::size_t k : list)
      if (!st.mu_used[k]) to.push_back(k);
  std::sort(from.begin(), from.end(), [&](std::size_t a, std::size_t b) {
    return st.current[a].cell < st.current[b].cell;
  });
  std::sort(to.begin(), to.end(), [&](std::size_t a, std::size_t b) {
    return st.next[a].cell < st.next[b].cell;
  });
  commit(st, match_lists(st, from, to, {}, {}));
}

}  // namespace detail

/// Step 1 of Motill for one pair of clouds sharing `grid`. ICF matches inside
/// each cuboid, then between neighboring cuboids, then whatever is left
/// across the grid; ICL runs the neighbor phase first. Flights are ordered by
/// (source cuboid, source cell).
inline TransitionPlan motill_transition(const PointCloud& current, const Occupancy& cur_occ,
                                        const PointCloud& next, const Occupancy& next_occ,
                                        const Grid& grid, Variant variant, double speed,
                                        std::size_t workers = 1) {
  if (variant == Variant::Simple) return simple_transition(current, next, speed);
  const auto idx = detail::diff_index(current, next);

  detail::MotillState st{current, next, cur_occ, next_occ, {}, {}, {}, {}, {}};
  st.delta_in.resize(grid.size());
  st.mu_in.resize(grid.size());
  st.delta_used.assign(current.size(), 0);
  st.mu_used.assign(next.size(), 0);
  for (const std::size_t i : idx.delta) st.delta_in[cur_occ.cuboid_of[i]].push_back(i);
  for (const std::size_t k : idx.mu) st.mu_in[next_occ.cuboid_of[k]].push_back(k);
  for (auto& list : st.delta_in) {
    std::sort(list.begin(), list.end(),
              [&](std::size_t a, std::size_t b) { return current[a].cell < current[b].cell; });
  }
  for (auto& list : st.mu_in) {
    std::sort(list.begin(), list.end(),
              [&](std::size_t a, std::size_t b) { return next[a].cell < next[b].cell; });
  }

  if (variant == Variant::Icf) {
    detail::intra_phase(st, workers);
    detail::inter_phase(st, grid, workers);
  } else {
    detail::inter_phase(st, grid, workers);
    detail::intra_phase(st, workers);
  }
  detail::final_phase(st);

  std::sort(st.matches.begin(), st.matches.end(), [&](const auto& a, const auto& b) {
    if (a.cuboid != b.cuboid) return a.cuboid < b.cuboid;
    return current[a.from].cell < current[b.from].cell;
  });

  TransitionPlan plan;
  plan.unchanged = idx.unchanged;
  plan.gamma = idx.gamma;
  plan.epsilon.reserve(st.matches.size());
  for (const auto& m : st.matches) {
    plan.epsilon.push_back(FlightPath::make(current[m.from].cell.as_vec(), next[m.to], 0.0, speed));
  }
  for (const std::size_t i : idx.delta)
    if (!st.delta_used[i]) plan.delta.push_back(current[i]);
  for (const std::size_t k : idx.mu)
    if (!st.mu_used[k]) plan.mu.push_back(next[k]);
  std::sort(plan.delta.begin(), plan.delta.end(), detail::by_cell);
  std::sort(plan.mu.begin(), plan.mu.end(), detail::by_cell);
  return plan;
}

inline TransitionPlan motill_transition(const PointCloud& current, const PointCloud& next,
                                        const Grid& grid, Variant variant, double speed,
                                        std::size_t workers = 1) {
  return motill_transition(current, populate_grid(grid, current), next,
                           populate_grid(grid, next), grid, variant, speed, workers);
}

// ---------------------------------------------------------------------------
// Step 2

struct Step2Outcome {
  std::size_t recalls{0};
  std::size_t fresh_deploys{0};
  std::size_t dark_reuses{0};
  bool executed{false};
};

/// Resolves the freed FLSs and vacant cells Step 1 left over anywhere in the
/// scene. A freed FLS of cloud i may serve a vacant cell of a later cloud j
/// by going dark and flying there (stored with the transition out of cloud
/// i, lighting at j). Pairs are taken in ascending distance; a pair is
/// dropped in favour of recall + fresh deployment when that round trip is
/// shorter. Freed FLSs with no later vacancy are recalled; vacant cells with
/// no earlier freed FLS are filled from the nearest stocked dispatcher.
/// Stations are the dispatchers. Re-running replaces earlier Step 2 output.
inline Step2Outcome step2_resolve(SceneEncoding& enc, const DisplayConfig& config) {
  config.validate();
  Step2Outcome outcome;
  for (auto& t : enc.transitions) {
    t.recalls.clear();
    t.fresh_deploys.clear();
    std::erase_if(t.epsilon, [](const FlightPath& f) { return f.lights_at.has_value(); });
  }

  struct Freed {
    std::size_t cloud;
    Point point;
  };
  struct Vacant {
    std::size_t cloud;
    Point point;
  };
  std::vector<Freed> freed;
  std::vector<Vacant> vacant;
  for (std::size_t t = 0; t < enc.transitions.size(); ++t) {
    for (const auto& p : enc.transitions[t].delta) freed.push_back({t, p});
    for (const auto& p : enc.transitions[t].mu) vacant.push_back({t + 1, p});
  }
  if (freed.empty() && vacant.empty()) return outcome;
  outcome.executed = true;

  const auto key = [](const auto& a, const auto& b) {
    return std::tie(a.cloud, a.point.cell) < std::tie(b.cloud, b.point.cell);
  };
  std::sort(freed.begin(), freed.end(), key);
  std::sort(vacant.begin(), vacant.end(), key);

  std::vector<char> recall(freed.size(), 1);
  std::vector<char> fresh(vacant.size(), 1);
  std::vector<std::pair<std::size_t, std::size_t>> dark;

  const auto nearest = [&](const Vec3& p) { return *config.nearest_dispatcher(p); };
  if (!freed.empty() && !vacant.empty()) {
    std::vector<Cell> src;
    std::vector<Cell> dst;
    for (const auto& f : freed) src.push_back(f.point.cell);
    for (const auto& v : vacant) dst.push_back(v.point.cell);
    std::vector<char> used(freed.size(), 0);
    PairingHooks hooks;
    hooks.allowed = [&](std::size_t r, std::size_t c) { return vacant[c].cloud > freed[r].cloud; };
    hooks.source_open = [&](std::size_t r) { return !used[r]; };
    ascending_pairs(src, dst, hooks, [&](std::size_t r, std::size_t c) {
      used[r] = 1;
      const Vec3 from = freed[r].point.cell.as_vec();
      const Vec3 to = vacant[c].point.cell.as_vec();
      const double tau = euclidean_distance(from, to);
      const double round_trip =
          euclidean_distance(from, config.dispatchers[nearest(from)].position) +
          euclidean_distance(config.dispatchers[nearest(to)].position, to);
      if (!(round_trip < tau)) {
        recall[r] = 0;
        fresh[c] = 0;
        dark.emplace_back(r, c);
      }
      return PairingStep::Continue;
    });
  }

  for (const auto& [r, c] : dark) {
    FlightPath fp =
        FlightPath::make(freed[r].point.cell.as_vec(), vacant[c].point, 0.0, config.fls_speed);
    fp.lights_at = vacant[c].cloud;
    enc.transitions[freed[r].cloud].epsilon.push_back(fp);
  }
  outcome.dark_reuses = dark.size();

  std::vector<std::size_t> stock(config.dispatchers.size(), 0);
  std::vector<char> unbounded(config.dispatchers.size(), 0);
  for (std::size_t j = 0; j < config.dispatchers.size(); ++j) {
    if (config.dispatchers[j].unbounded()) {
      unbounded[j] = 1;
    } else {
      const std::size_t used =
          j < enc.initial_plan.assignments.size() ? enc.initial_plan.assignments[j].size() : 0;
      stock[j] = *config.dispatchers[j].inventory - std::min(used, *config.dispatchers[j].inventory);
    }
  }

  // Chronological pass: deployments for cloud t+1 draw on current stock,
  // FLSs recalled after cloud t restock their station afterwards.
  std::size_t fi = 0;
  std::size_t vi = 0;
  for (std::size_t t = 0; t < enc.transitions.size(); ++t) {
    auto& plan = enc.transitions[t];
    for (; vi < vacant.size() && vacant[vi].cloud == t + 1; ++vi) {
      if (!fresh[vi]) continue;
      const Vec3 to = vacant[vi].point.cell.as_vec();
      const auto j = config.nearest_dispatcher(
          to, [&](std::size_t d) { return unbounded[d] || stock[d] > 0; });
      if (!j) {
        throw InfeasibleError("no dispatcher has FLSs left to deploy to " +
                              to_string(vacant[vi].point.cell));
      }
      if (!unbounded[*j]) --stock[*j];
      plan.fresh_deploys.push_back(FreshDeploy{config.dispatchers[*j].id, vacant[vi].point});
    }
    for (; fi < freed.size() && freed[fi].cloud == t; ++fi) {
      if (!recall[fi]) continue;
      const std::size_t j = nearest(freed[fi].point.cell.as_vec());
      if (!unbounded[j]) ++stock[j];
      plan.recalls.push_back(Recall{freed[fi].point, config.dispatchers[j].id});
    }
    std::sort(plan.recalls.begin(), plan.recalls.end(),
              [](const Recall& a, const Recall& b) { return a.from.cell < b.from.cell; });
    std::sort(plan.fresh_deploys.begin(), plan.fresh_deploys.end(),
              [](const FreshDeploy& a, const FreshDeploy& b) { return a.to.cell < b.to.cell; });
    auto first_dark = std::stable_partition(plan.epsilon.begin(), plan.epsilon.end(),
                                            [](const FlightPath& f) { return !f.lights_at; });
    std::sort(first_dark, plan.epsilon.end(), [](const FlightPath& a, const FlightPath& b) {
      return std::tie(a.source.x, a.source.y, a.source.z) <
             std::tie(b.source.x, b.source.y, b.source.z);
    });
    outcome.recalls += plan.recalls.size();
    outcome.fresh_deploys += plan.fresh_deploys.size();
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayReport {
  bool passed{true};
  std::size_t cloud_index{0};  ///< first cloud that does not match
  std::optional<Cell> cell;    ///< a diverging cell, when one is known
  std::string detail;
};

namespace detail {

struct ReplayFailure {
  std::size_t cloud;
  std::optional<Cell> cell;
  std::string what;
};

inline std::optional<Cell> to_cell(const Vec3& v) {
  const Cell c{static_cast<int>(std::lround(v.x)), static_cast<int>(std::lround(v.y)),
               static_cast<int>(std::lround(v.z))};
  if (c.as_vec() != v) return std::nullopt;
  return c;
}

/// Steps an encoding forward one cloud at a time, tracking which cells are
/// lit and with what color. Dark FLSs waiting to light later are held aside.
class Replayer {
 public:
  /// A nominal replay treats delta as gone and mu as filled whether or not
  /// Step 2 has placed them yet; it gives the intended state of a partial
  /// encoding.
  explicit Replayer(const DeploymentPlan& plan, bool nominal = false) : nominal_(nominal) {
    for (const auto& p : plan.all_points()) light(p, 0);
  }

  [[nodiscard]] const std::unordered_map<Cell, Rgb, CellHash>& lit() const { return lit_; }
  [[nodiscard]] std::size_t cloud() const { return cloud_; }

  void apply(const TransitionPlan& t) {
    const std::size_t target = cloud_ + 1;
    for (const auto& f : t.epsilon) {
      const auto src = to_cell(f.source);
      if (!src) throw ReplayFailure{target, std::nullopt, "flight source is not a display cell"};
      extinguish(*src, target, "flight source");
    }
    for (const auto& r : t.recalls) extinguish(r.from.cell, target, "recalled FLS");
    if (nominal_)
      for (const auto& p : t.delta) lit_.erase(p.cell);
    for (const auto& g : t.gamma) {
      const auto it = lit_.find(g.cell);
      if (it == lit_.end() || it->second != g.from) {
        throw ReplayFailure{target, g.cell, "color change on a cell not lit with its old color"};
      }
      it->second = g.to;
    }
    for (const auto& f : t.epsilon) {
      if (!f.lights_at || *f.lights_at == target) {
        light(f.destination, target);
      } else if (*f.lights_at > target) {
        parked_[*f.lights_at].push_back(f.destination);
      } else {
        throw ReplayFailure{target, f.destination.cell, "dark flight lights in the past"};
      }
    }
    if (auto it = parked_.find(target); it != parked_.end()) {
      for (const auto& p : it->second) light(p, target);
      parked_.erase(it);
    }
    for (const auto& d : t.fresh_deploys) light(d.to, target);
    if (nominal_)
      for (const auto& p : t.mu) lit_.emplace(p.cell, p.color);
    cloud_ = target;
  }

  [[nodiscard]] std::vector<Point> state() const {
    std::vector<Point> out;
    out.reserve(lit_.size());
    for (const auto& [cell, color] : lit_) out.push_back(Point{cell, color});
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  void light(const Point& p, std::size_t cloud) {
    if (!lit_.emplace(p.cell, p.color).second) {
      throw ReplayFailure{cloud, p.cell, "two FLSs lit in one cell"};
    }
  }
  void extinguish(const Cell& c, std::size_t cloud, const char* what) {
    if (lit_.erase(c) == 0) {
      throw ReplayFailure{cloud, c, std::string(what) + " is not lit"};
    }
  }

  std::unordered_map<Cell, Rgb, CellHash> lit_;
  std::map<std::size_t, std::vector<Point>> parked_;
  std::size_t cloud_{0};
  bool nominal_{false};
};

/// Smallest cell on which the lit state and the cloud disagree.
inline std::optional<Cell> first_mismatch(const std::unordered_map<Cell, Rgb, CellHash>& lit,
                                          const PointCloud& cloud) {
  std::optional<Cell> worst;
  const auto note = [&](const Cell& c) {
    if (!worst || c < *worst) worst = c;
  };
  std::unordered_map<Cell, Rgb, CellHash> want;
  want.reserve(cloud.size() * 2);
  for (const auto& p : cloud) want.emplace(p.cell, p.color);
  for (const auto& [cell, color] : lit) {
    const auto it = want.find(cell);
    if (it == want.end() || it->second != color) note(cell);
  }
  for (const auto& [cell, color] : want)
    if (!lit.contains(cell)) note(cell);
  return worst;
}

}  // namespace detail

/// Replays the encoding and compares every intermediate state to the scene.
inline ReplayReport verify_encoding(const SceneEncoding& enc, const Scene& scene) {
  ReplayReport report;
  const auto fail = [&](std::size_t cloud, std::optional<Cell> cell, std::string what) {
    report.passed = false;
    report.cloud_index = cloud;
    report.cell = cell;
    report.detail = std::move(what);
    return report;
  };
  if (scene.clouds.empty()) return fail(0, std::nullopt, "scene has no clouds");
  if (enc.transitions.size() + 1 != scene.clouds.size()) {
    return fail(std::min(enc.transitions.size(), scene.clouds.size()), std::nullopt,
                "encoding has " + std::to_string(enc.transitions.size()) +
                    " transitions for a scene of " + std::to_string(scene.clouds.size()) +
                    " clouds");
  }
  try {
    detail::Replayer replay(enc.initial_plan);
    if (auto c = detail::first_mismatch(replay.lit(), scene.clouds[0])) {
      return fail(0, c, "initial deployment differs from the first cloud");
    }
    for (std::size_t t = 0; t < enc.transitions.size(); ++t) {
      replay.apply(enc.transitions[t]);
      if (auto c = detail::first_mismatch(replay.lit(), scene.clouds[t + 1])) {
        return fail(t + 1, c, "replayed state differs from the cloud");
      }
    }
  } catch (const detail::ReplayFailure& f) {
    return fail(f.cloud, f.cell, f.what);
  }
  return report;
}

/// Lit cells after the last transition, counting leftover delta as departed
/// and leftover mu as filled. Throws ValidationError when the encoding is
/// internally inconsistent.
inline std::vector<Point> final_state(const SceneEncoding& enc) {
  try {
    detail::Replayer replay(enc.initial_plan, true);
    for (const auto& t : enc.transitions) replay.apply(t);
    return replay.state();
  } catch (const detail::ReplayFailure& f) {
    throw ValidationError("inconsistent encoding at cloud " + std::to_string(f.cloud) + ": " +
                          f.what);
  }
}

// ---------------------------------------------------------------------------
// Groups of point clouds

/// Step 1 over one group: deploy its first cloud, build the grid on it and
/// compute every consecutive transition. Step 2 is left to the caller.
inline SceneEncoding encode_gpc(std::span<const PointCloud> clouds, const DisplayConfig& display,
                                const GpcConfig& config, Assigner initial,
                                std::size_t workers = 1) {
  using Clock = std::chrono::steady_clock;
  const auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };
  if (clouds.empty()) throw ValidationError("group of point clouds is empty");

  SceneEncoding enc;
  enc.initial_plan = assign(clouds[0], display, initial);
  const std::size_t n = clouds.size();
  if (n == 1) return enc;
  enc.transitions.resize(n - 1);
  enc.metrics.resize(n - 1);

  if (config.variant == Variant::Simple) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto t0 = Clock::now();
      enc.transitions[i] = simple_transition(clouds[i], clouds[i + 1], display.fls_speed);
      enc.metrics[i].elapsed_ms = ms_since(t0);
    }
  } else {
    auto t0 = Clock::now();
    const Grid grid = build_grid(clouds[0], display.dims, config.theta);
    const double build_ms = ms_since(t0);
    std::vector<Occupancy> occ(n);
    std::vector<double> populate_ms(n, 0.0);
    parallel_for(n, workers, [&](std::size_t i) {
      const auto start = Clock::now();
      occ[i] = populate_grid(grid, clouds[i]);
      populate_ms[i] = ms_since(start);
    });
    for (std::size_t i = 0; i + 1 < n; ++i) {
      t0 = Clock::now();
      enc.transitions[i] = motill_transition(clouds[i], occ[i], clouds[i + 1], occ[i + 1], grid,
                                             config.variant, display.fls_speed, workers);
      enc.metrics[i].elapsed_ms = ms_since(t0) + populate_ms[i + 1] + (i == 0 ? build_ms : 0.0);
    }
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    enc.metrics[i].flights = enc.transitions[i].epsilon.size();
    enc.metrics[i].distance = enc.transitions[i].flight_distance();
  }
  return enc;
}

/// Appends `second` to `first`. The second group starts with a repeat of the
/// first group's last cloud, so its own initial deployment is redundant and
/// is dropped; FLSs carry over by cell.
inline SceneEncoding fuse_gpcs(SceneEncoding first, const SceneEncoding& second) {
  if (second.transitions.empty() && second.initial_plan.point_count() == 0) return first;

  const auto boundary = final_state(first);
  auto incoming = second.initial_plan.all_points();
  std::sort(incoming.begin(), incoming.end());
  if (boundary != incoming) {
    throw ValidationError("cannot fuse groups: boundary clouds differ");
  }

  const std::size_t offset = first.transitions.size();
  for (std::size_t t = 0; t < second.transitions.size(); ++t) {
    TransitionPlan plan = second.transitions[t];
    for (auto& f : plan.epsilon)
      if (f.lights_at) *f.lights_at += offset;
    first.transitions.push_back(std::move(plan));
    if (t < second.metrics.size()) first.metrics.push_back(second.metrics[t]);
  }
  return first;
}

/// Index ranges [begin, end) of the groups: consecutive runs of omega clouds,
/// each group after the first starting with its predecessor's last cloud.
inline std::vector<std::pair<std::size_t, std::size_t>> gpc_ranges(std::size_t clouds,
                                                                   std::size_t omega) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < clouds; start += omega) {
    const std::size_t end = std::min(start + omega, clouds);
    const std::size_t begin = start == 0 ? 0 : start - 1;
    out.emplace_back(begin, end);
  }
  return out;
}

/// Full pipeline: groups encoded concurrently, fused in order, then Step 2
/// over the whole scene. Identical output for every worker count.
inline SceneEncoding encode_scene(const Scene& scene, const DisplayConfig& display,
                                  const GpcConfig& config, Assigner initial,
                                  std::size_t workers = 1) {
  display.validate();
  scene.validate(display.dims);
  config.validate(scene.clouds.size());

  const std::size_t omega = config.omega.value_or(scene.clouds.size());
  const auto ranges = gpc_ranges(scene.clouds.size(), omega);
  std::vector<SceneEncoding> parts(ranges.size());
  const std::size_t inner = ranges.size() > 1 ? 1 : workers;
  parallel_for(ranges.size(), workers, [&](std::size_t g) {
    const auto [begin, end] = ranges[g];
    parts[g] = encode_gpc(std::span(scene.clouds).subspan(begin, end - begin), display, config,
                          initial, inner);
  });

  SceneEncoding enc = std::move(parts[0]);
  for (std::size_t g = 1; g < parts.size(); ++g) enc = fuse_gpcs(std::move(enc), parts[g]);
  step2_resolve(enc, display);
  for (std::size_t i = 0; i < enc.transitions.size() && i < enc.metrics.size(); ++i) {
    enc.metrics[i].flights = enc.transitions[i].epsilon.size();
    enc.metrics[i].distance = enc.transitions[i].flight_distance();
  }
  return enc;
}

}  // namespace flsplan
