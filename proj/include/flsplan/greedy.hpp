#pragma once

// Ascending-distance greedy pairing of freed FLSs (sources) with vacant cells
// (targets): repeatedly commit the shortest pair whose endpoints are both
// still free.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "flsplan/model.hpp"

namespace flsplan {

enum class PairingStep { Continue, Stop };

struct PairingHooks {
  /// Whether source r may ever pair with target c. Must not change during a run.
  std::function<bool(std::size_t, std::size_t)> allowed;
  /// Whether source r is still open. Once false it must stay false.
  std::function<bool(std::size_t)> source_open;
};

/// Visits pairs in the order a full sort of all (source, target) pairs by
/// (squared distance, source index, target index) would produce, skipping
/// pairs with an endpoint already used. Callers put sources and targets in
/// their tie-break order. `on_pair` returns Stop to end the run early.
///
/// Instead of materialising every pair, each source keeps its best free
/// target in a min-heap; a popped entry whose target was taken meanwhile is
/// recomputed and pushed back. Heap keys only grow, so the first valid pop
/// is the global minimum.
template <class OnPair>
void ascending_pairs(std::span<const Cell> sources, std::span<const Cell> targets,
                     const PairingHooks& hooks, OnPair&& on_pair) {
  if (sources.empty() || targets.empty()) return;

  std::vector<std::size_t> free_targets(targets.size());
  std::vector<std::size_t> slot(targets.size());
  for (std::size_t c = 0; c < targets.size(); ++c) free_targets[c] = slot[c] = c;
  std::vector<char> target_used(targets.size(), 0);

  using Entry = std::tuple<std::int64_t, std::size_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  const auto best_for = [&](std::size_t r) -> std::optional<Entry> {
    std::optional<Entry> best;
    for (const std::size_t c : free_targets) {
      if (hooks.allowed && !hooks.allowed(r, c)) continue;
      const Entry e{squared_distance(sources[r], targets[c]), r, c};
      if (!best || e < *best) best = e;
    }
    return best;
  };

  for (std::size_t r = 0; r < sources.size(); ++r) {
    if (hooks.source_open && !hooks.source_open(r)) continue;
    if (auto e = best_for(r)) heap.push(*e);
  }

  while (!heap.empty() && !free_targets.empty()) {
    const auto [d2, r, c] = heap.top();
    heap.pop();
    if (hooks.source_open && !hooks.source_open(r)) continue;
    if (target_used[c]) {
      if (auto e = best_for(r)) heap.push(*e);
      continue;
    }
    target_used[c] = 1;
    const std::size_t pos = slot[c];
    free_targets[pos] = free_targets.back();
    slot[free_targets[pos]] = pos;
    free_targets.pop_back();
    if (on_pair(r, c) == PairingStep::Stop) return;
  }
}

struct GreedyMatch {
  std::vector<FlightPath> epsilon;
  std::vector<Point> freed_left;   ///< unmatched sources
  std::vector<Point> vacant_left;  ///< unmatched targets
};

/// Greedy matching of freed FLSs to vacant cells: sorts all pairings by
/// ascending distance (ties by source cell, then target cell) and takes each
/// pairing whose endpoints are both unused. Produces min(|freed|, |vacant|)
/// flight paths launched at time 0.
inline GreedyMatch greedy_match(std::span<const Point> freed, std::span<const Point> vacant,
                                double speed) {
  std::vector<Point> src(freed.begin(), freed.end());
  std::vector<Point> dst(vacant.begin(), vacant.end());
  std::sort(src.begin(), src.end());
  std::sort(dst.begin(), dst.end());
  std::vector<Cell> src_cells;
  std::vector<Cell> dst_cells;
  for (const auto& p : src) src_cells.push_back(p.cell);
  for (const auto& p : dst) dst_cells.push_back(p.cell);

  GreedyMatch out;
  std::vector<char> src_used(src.size(), 0);
  std::vector<char> dst_used(dst.size(), 0);
  PairingHooks hooks;
  hooks.source_open = [&](std::size_t r) { return !src_used[r]; };
  ascending_pairs(src_cells, dst_cells, hooks, [&](std::size_t r, std::size_t c) {
    src_used[r] = 1;
    dst_used[c] = 1;
    out.epsilon.push_back(FlightPath::make(src[r].cell.as_vec(), dst[c], 0.0, speed));
    return PairingStep::Continue;
  });
  for (std::size_t r = 0; r < src.size(); ++r)
    if (!src_used[r]) out.freed_left.push_back(src[r]);
  for (std::size_t c = 0; c < dst.size(); ++c)
    if (!dst_used[c]) out.vacant_left.push_back(dst[c]);
  return out;
}

}  // namespace flsplan
