#pragma once

// Reference solvers used to judge the heuristics: optimal bipartite matching
// and optimal launch ordering by exhaustive search.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "flsplan/model.hpp"

namespace flsplan::oracle {

struct Matching {
  double total{0.0};
  /// assignment[r] = column matched to row r, or npos when unmatched.
  std::vector<std::size_t> assignment;

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

using CostMatrix = std::vector<std::vector<double>>;

namespace detail {

inline void check_rectangular(const CostMatrix& cost) {
  for (const auto& row : cost) {
    if (row.size() != cost.front().size()) throw ValidationError("cost matrix rows differ in length");
  }
}

inline CostMatrix transpose(const CostMatrix& cost) {
  CostMatrix t(cost.front().size(), std::vector<double>(cost.size()));
  for (std::size_t r = 0; r < cost.size(); ++r)
    for (std::size_t c = 0; c < cost[r].size(); ++c) t[c][r] = cost[r][c];
  return t;
}

inline Matching flip(const Matching& m, std::size_t rows) {
  Matching out;
  out.total = m.total;
  out.assignment.assign(rows, Matching::npos);
  for (std::size_t c = 0; c < m.assignment.size(); ++c)
    if (m.assignment[c] != Matching::npos) out.assignment[m.assignment[c]] = c;
  return out;
}

}  // namespace detail

/// Minimum-cost matching of size min(rows, cols) by dynamic programming over
/// subsets of the smaller side. Exact; exponential in min(rows, cols).
inline Matching exhaustive_match(const CostMatrix& cost) {
  if (cost.empty() || cost.front().empty()) return {0.0, std::vector<std::size_t>(cost.size(), Matching::npos)};
  detail::check_rectangular(cost);
  const std::size_t rows = cost.size();
  const std::size_t cols = cost.front().size();
  if (cols < rows) return detail::flip(exhaustive_match(detail::transpose(cost)), rows);
  if (rows > 20) throw ValidationError("exhaustive matching supports at most 20 rows");

  // Rows are the smaller side. best[mask][c]: cheapest way to match the rows
  // in mask using columns 0..c-1 only.
  const std::size_t masks = std::size_t{1} << rows;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best(cols + 1, std::vector<double>(masks, inf));
  best[0][0] = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t mask = 0; mask < masks; ++mask) {
      const double here = best[c][mask];
      if (here == inf) continue;
      best[c + 1][mask] = std::min(best[c + 1][mask], here);
      for (std::size_t r = 0; r < rows; ++r) {
        if (mask & (std::size_t{1} << r)) continue;
        const std::size_t next = mask | (std::size_t{1} << r);
        best[c + 1][next] = std::min(best[c + 1][next], here + cost[r][c]);
      }
    }
  }

  Matching out;
  out.assignment.assign(rows, Matching::npos);
  std::size_t mask = masks - 1;
  out.total = best[cols][mask];
  for (std::size_t c = cols; c-- > 0;) {
    if (best[c][mask] == best[c + 1][mask]) continue;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!(mask & (std::size_t{1} << r))) continue;
      const std::size_t prev = mask & ~(std::size_t{1} << r);
      if (best[c][prev] + cost[r][c] == best[c + 1][mask]) {
        out.assignment[r] = c;
        mask = prev;
        break;
      }
    }
  }
  return out;
}

/// Hungarian algorithm with potentials, O(n^2 m). Handles rectangular
/// matrices by matching every row of the smaller side.
inline Matching hungarian_match(const CostMatrix& cost) {
  if (cost.empty() || cost.front().empty()) return {0.0, std::vector<std::size_t>(cost.size(), Matching::npos)};
  detail::check_rectangular(cost);
  const std::size_t rows = cost.size();
  const std::size_t cols = cost.front().size();
  if (cols < rows) return detail::flip(hungarian_match(detail::transpose(cost)), rows);

  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = rows;
  const std::size_t m = cols;
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0);
  std::vector<std::size_t> way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Matching out;
  out.assignment.assign(rows, Matching::npos);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) {
      out.assignment[p[j] - 1] = j - 1;
      out.total += cost[p[j] - 1][j - 1];
    }
  }
  return out;
}

/// Exact minimum-cost matching: subset DP for small instances, Hungarian
/// beyond.
inline Matching optimal_match(const CostMatrix& cost) {
  if (cost.empty() || cost.front().empty()) return exhaustive_match(cost);
  const std::size_t small = std::min(cost.size(), cost.front().size());
  return small <= 12 ? exhaustive_match(cost) : hungarian_match(cost);
}

inline CostMatrix distance_matrix(std::span<const Point> freed, std::span<const Point> vacant) {
  CostMatrix cost(freed.size(), std::vector<double>(vacant.size()));
  for (std::size_t r = 0; r < freed.size(); ++r)
    for (std::size_t c = 0; c < vacant.size(); ++c)
      cost[r][c] = euclidean_distance(freed[r].cell, vacant[c].cell);
  return cost;
}

/// Optimal matching of freed FLSs to vacant cells by Euclidean distance.
inline Matching optimal_match(std::span<const Point> freed, std::span<const Point> vacant) {
  return optimal_match(distance_matrix(freed, vacant));
}

struct MakespanOrder {
  double makespan{0.0};
  std::vector<std::size_t> order;  ///< launch position -> input index
};

/// Tries every launch order of one dispatcher's FLSs (launch k at k/f,
/// travel distance/speed) and returns the smallest arrival of the last FLS.
/// Ties go to the lexicographically first order. At most 9 FLSs.
inline MakespanOrder optimal_makespan_order(std::span<const double> distances, double rate,
                                            double speed) {
  if (distances.size() > 9) throw ValidationError("makespan search supports at most 9 FLSs");
  if (!(rate > 0.0) || !(speed > 0.0)) throw ValidationError("rate and speed must be positive");
  MakespanOrder best;
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  bool first = true;
  do {
    double span = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      span = std::max(span, static_cast<double>(k) / rate + distances[order[k]] / speed);
    }
    if (first || span < best.makespan) {
      best.makespan = span;
      best.order = order;
      first = false;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

}  // namespace flsplan::oracle
