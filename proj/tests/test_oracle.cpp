#include <gtest/gtest.h>

#include <numeric>

#include "support/generators.hpp"

using namespace flsplan;
using oracle::CostMatrix;
using oracle::Matching;

namespace {

/// Every injection of rows into columns, by plain recursion.
double brute_force(const CostMatrix& cost) {
  const std::size_t rows = cost.size();
  const std::size_t cols = cost.front().size();
  if (rows > cols) {
    CostMatrix t(cols, std::vector<double>(rows));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) t[c][r] = cost[r][c];
    return brute_force(t);
  }
  std::vector<char> used(cols, 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, double)> go = [&](std::size_t r, double acc) {
    if (r == rows) {
      best = std::min(best, acc);
      return;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (used[c]) continue;
      used[c] = 1;
      go(r + 1, acc + cost[r][c]);
      used[c] = 0;
    }
  };
  go(0, 0.0);
  return best;
}

double assignment_cost(const CostMatrix& cost, const Matching& m) {
  double sum = 0.0;
  std::vector<char> taken(cost.front().size(), 0);
  for (std::size_t r = 0; r < m.assignment.size(); ++r) {
    if (m.assignment[r] == Matching::npos) continue;
    EXPECT_FALSE(taken[m.assignment[r]]);
    taken[m.assignment[r]] = 1;
    sum += cost[r][m.assignment[r]];
  }
  return sum;
}

CostMatrix random_matrix(testkit::Rng& rng, std::size_t rows, std::size_t cols) {
  std::uniform_int_distribution<int> v(0, 20);  // integers: plenty of ties
  CostMatrix m(rows, std::vector<double>(cols));
  for (auto& row : m)
    for (auto& x : row) x = v(rng);
  return m;
}

}  // namespace

TEST(OptimalMatch, NonOptimalGreedyCase) {
  const std::vector<Point> freed{{{3, 0, 0}}, {{0, 0, 0}}};  // P1, P2
  const std::vector<Point> vacant{{{2, 0, 0}}, {{5, 0, 0}}};  // Q1, Q2
  const auto m = oracle::optimal_match(freed, vacant);
  EXPECT_EQ(m.total, 4.0);
  EXPECT_EQ(m.assignment, (std::vector<std::size_t>{1, 0}));
}

TEST(OptimalMatch, EmptyInstance) {
  EXPECT_EQ(oracle::optimal_match(std::vector<Point>{}, std::vector<Point>{}).total, 0.0);
}

TEST(OptimalMatch, SubsetDpMatchesBruteForce) {
  testkit::Rng rng(10);
  std::uniform_int_distribution<std::size_t> n(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    const auto cost = random_matrix(rng, n(rng), n(rng));
    const auto m = oracle::exhaustive_match(cost);
    EXPECT_DOUBLE_EQ(m.total, brute_force(cost));
    EXPECT_DOUBLE_EQ(assignment_cost(cost, m), m.total);
  }
}

TEST(OptimalMatch, HungarianMatchesSubsetDp) {
  testkit::Rng rng(12);
  std::uniform_int_distribution<std::size_t> n(1, 11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto cost = random_matrix(rng, n(rng), n(rng));
    const auto h = oracle::hungarian_match(cost);
    const auto e = oracle::exhaustive_match(cost);
    EXPECT_DOUBLE_EQ(h.total, e.total);
    EXPECT_DOUBLE_EQ(assignment_cost(cost, h), h.total);
    std::size_t matched = 0;
    for (const auto a : h.assignment) matched += a != Matching::npos ? 1 : 0;
    EXPECT_EQ(matched, std::min(cost.size(), cost.front().size()));
  }
}

TEST(OptimalMatch, LargeInstancesUseHungarian) {
  testkit::Rng rng(13);
  const auto cost = random_matrix(rng, 40, 50);
  const auto m = oracle::optimal_match(cost);
  EXPECT_DOUBLE_EQ(m.total, oracle::hungarian_match(cost).total);
  EXPECT_DOUBLE_EQ(assignment_cost(cost, m), m.total);
}

TEST(OptimalMatch, RaggedMatrixRejected) {
  CostMatrix bad{{1, 2}, {3}};
  EXPECT_THROW(oracle::hungarian_match(bad), ValidationError);
}

TEST(MakespanOrder, HandExample) {
  const std::vector<double> d{4, 8, 2};
  const auto best = oracle::optimal_makespan_order(d, 10.0, 4.0);
  EXPECT_DOUBLE_EQ(best.makespan, 2.0);
}

TEST(MakespanOrder, EmptyAndTooLarge) {
  EXPECT_EQ(oracle::optimal_makespan_order(std::vector<double>{}, 10.0, 4.0).makespan, 0.0);
  EXPECT_THROW(oracle::optimal_makespan_order(std::vector<double>(10, 1.0), 10.0, 4.0), ValidationError);
}

TEST(MakespanOrder, DescendingOrderIsOptimal) {
  testkit::Rng rng(21);
  std::uniform_real_distribution<double> dist(0.0, 50.0);
  std::uniform_int_distribution<std::size_t> n(1, 7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> d(n(rng));
    for (auto& x : d) x = dist(rng);
    auto desc = d;
    std::sort(desc.rbegin(), desc.rend());
    double span = 0.0;
    for (std::size_t k = 0; k < desc.size(); ++k) span = std::max(span, k / 10.0 + desc[k] / 4.0);
    EXPECT_NEAR(span, oracle::optimal_makespan_order(d, 10.0, 4.0).makespan, 1e-12);
  }
}
