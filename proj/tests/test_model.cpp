#include <gtest/gtest.h>

#include <cmath>

#include "support/generators.hpp"

using namespace flsplan;

TEST(Distance, ZeroForIdenticalPoints) {
  EXPECT_EQ(euclidean_distance(Vec3{0, 0, 0}, Vec3{0, 0, 0}), 0.0);
}

TEST(Distance, ThreeFourFive) { EXPECT_EQ(euclidean_distance(Vec3{0, 0, 0}, Vec3{3, 4, 0}), 5.0); }

TEST(Distance, CubeDiagonal) {
  EXPECT_NEAR(euclidean_distance(Vec3{0, 0, 0}, Vec3{100, 100, 100}), std::sqrt(30000.0), 1e-12);
  EXPECT_NEAR(euclidean_distance(Vec3{0, 0, 0}, Vec3{100, 100, 100}), 173.20508075688772, 1e-9);
}

TEST(Distance, CellAndVectorFormsAgree) {
  const Cell a{1, -2, 7};
  const Cell b{-4, 5, 0};
  EXPECT_DOUBLE_EQ(euclidean_distance(a, b), euclidean_distance(a.as_vec(), b.as_vec()));
  EXPECT_EQ(squared_distance(a, b), 25 + 49 + 49);
}

TEST(Distance, MetricPropertiesOnRandomTriples) {
  testkit::Rng rng(7);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 a{u(rng), u(rng), u(rng)};
    const Vec3 b{u(rng), u(rng), u(rng)};
    const Vec3 c{u(rng), u(rng), u(rng)};
    const double ab = euclidean_distance(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_EQ(ab, euclidean_distance(b, a));
    EXPECT_LE(ab, euclidean_distance(a, c) + euclidean_distance(c, b) + 1e-9);
  }
}

TEST(PointCloud, RejectsDuplicateCells) {
  EXPECT_THROW(PointCloud({{{0, 0, 0}, kWhite}, {{0, 0, 0}, Rgb{1, 2, 3}}}), ValidationError);
}

TEST(PointCloud, RejectsEmpty) { EXPECT_THROW(PointCloud(std::vector<Point>{}), ValidationError); }

TEST(PointCloud, ChecksDisplayBounds) {
  const PointCloud c({{{0, 0, 0}}, {{10, 0, 0}}});
  EXPECT_NO_THROW(c.check_within(Dims{11, 1, 1}));
  EXPECT_THROW(c.check_within(Dims{10, 1, 1}), ValidationError);
}

TEST(PointCloud, SameContentIgnoresOrder) {
  const PointCloud a({{{0, 0, 0}}, {{1, 0, 0}}});
  const PointCloud b({{{1, 0, 0}}, {{0, 0, 0}}});
  EXPECT_TRUE(a.same_content(b));
  EXPECT_FALSE(a == b);
}

TEST(DisplayConfig, CornerLayoutIds) {
  const auto cfg = DisplayConfig::corners8(Dims{100, 100, 100});
  ASSERT_EQ(cfg.dispatchers.size(), 8u);
  EXPECT_EQ(cfg.dispatchers[0].position, (Vec3{0, 0, 0}));
  EXPECT_EQ(cfg.dispatchers[1].position, (Vec3{0, 0, 100}));
  EXPECT_EQ(cfg.dispatchers[2].position, (Vec3{0, 100, 0}));
  EXPECT_EQ(cfg.dispatchers[4].position, (Vec3{100, 0, 0}));
  EXPECT_EQ(cfg.dispatchers[7].position, (Vec3{100, 100, 100}));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(cfg.dispatchers[i].id, static_cast<int>(i) + 1);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(DisplayConfig, FloorCornersStayOnTheFloor) {
  const auto cfg = DisplayConfig::corners4_bottom(Dims{10, 20, 30});
  ASSERT_EQ(cfg.dispatchers.size(), 4u);
  for (const auto& d : cfg.dispatchers) EXPECT_EQ(d.position.y, 0.0);
}

TEST(DisplayConfig, RejectsBadParameters) {
  auto cfg = DisplayConfig::corners8(Dims{10, 10, 10});
  cfg.deploy_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = DisplayConfig::corners8(Dims{10, 10, 10});
  cfg.dispatchers[3].id = 9;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = DisplayConfig::corners8(Dims{0, 10, 10});
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(DisplayConfig, NearestDispatcherBreaksTiesByLowestId) {
  const auto cfg = DisplayConfig::corners8(Dims{10, 10, 10});
  EXPECT_EQ(cfg.nearest_dispatcher(Vec3{5, 5, 5}), 0u);
  EXPECT_EQ(cfg.nearest_dispatcher(Vec3{9, 0, 0}), 4u);
  EXPECT_EQ(cfg.nearest_dispatcher(Vec3{9, 0, 0}, [](std::size_t j) { return j != 4; }), 0u);
}

TEST(FlightPath, ArrivalIsLaunchPlusTravel) {
  const auto f = FlightPath::make(Vec3{0, 0, 0}, Point{{3, 4, 0}}, 1.5, 2.0);
  EXPECT_EQ(f.distance, 5.0);
  EXPECT_EQ(f.travel_time, 2.5);
  EXPECT_EQ(f.arrival_time(), 4.0);
}
