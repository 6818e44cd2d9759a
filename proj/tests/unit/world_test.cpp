#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "skylane/errors.hpp"
#include "skylane/world/clock.hpp"
#include "skylane/world/geo.hpp"
#include "skylane/world/geometry.hpp"
#include "skylane/world/random.hpp"

using namespace skylane;

namespace {

Obstacle sphere(Vec3 c, double r) { return {1, Sphere{c, r}, false, Vec3::Zero()}; }
Obstacle box(Vec3 lo, Vec3 hi) { return {2, Box{lo, hi}, false, Vec3::Zero()}; }
Obstacle cylinder(Vec3 base, double r, double h) { return {3, Cylinder{base, r, h}, false, Vec3::Zero()}; }

NoFlyZone square_zone() {
  NoFlyZone z;
  z.id = 1;
  z.footprint = {Vec2(0, 0), Vec2(10, 0), Vec2(10, 10), Vec2(0, 10)};
  z.floor = 0;
  z.ceiling = 100;
  z.active_from = 10;
  z.active_until = 20;
  return z;
}

}  // namespace

TEST(Geo, DatumMapsToOrigin) {
  const GeodeticPoint datum{24.48, 118.08, 10.0};
  EXPECT_LT(geodetic_to_local(datum, datum).norm(), 1e-9);
}

TEST(Geo, SmallLatitudeStepMatchesMeridianArc) {
  const GeodeticPoint datum{0.0, 0.0, 0.0};
  const LocalPoint p = geodetic_to_local({1e-5, 0.0, 0.0}, datum);
  // Meridian radius of curvature at the equator: a (1 - e^2).
  const double m = wgs84::kSemiMajor * (1.0 - wgs84::kEccSq);
  const double arc = 1e-5 * std::numbers::pi / 180.0 * m;
  EXPECT_NEAR(p.y(), arc, 1e-4);
  EXPECT_NEAR(p.y(), 1.11, 0.01);
  EXPECT_NEAR(p.x(), 0.0, 1e-9);
}

TEST(Geo, AltitudeIsAffine) {
  const GeodeticPoint datum{24.48, 118.08, 10.0};
  EXPECT_NEAR(geodetic_to_local({24.48, 118.08, 130.0}, datum).z(), 120.0, 1e-9);
}

TEST(Geo, OutOfRangeRejected) {
  const GeodeticPoint datum{0, 0, 0};
  EXPECT_THROW(geodetic_to_local({91.0, 0.0, 0.0}, datum), ValidationError);
  EXPECT_THROW(geodetic_to_local({0.0, -180.5, 0.0}, datum), ValidationError);
}

TEST(Geo, RoundTripWithinMicrometer) {
  RandomStream rng(2024, "geo-test");
  for (int i = 0; i < 1000; ++i) {
    const GeodeticPoint datum{rng.uniform(-80, 80), rng.uniform(-179, 179), rng.uniform(-100, 3000)};
    const LocalPoint p(rng.uniform(-7000, 7000), rng.uniform(-7000, 7000), rng.uniform(-500, 500));
    if (p.norm() > 10000) continue;
    const LocalPoint back = geodetic_to_local(local_to_geodetic(p, datum), datum);
    ASSERT_LT((back - p).norm(), 1e-6) << "point " << i;
  }
}

TEST(Geometry, SegmentThroughSphereCenter) {
  EXPECT_TRUE(segment_intersects_obstacle({0, 0, 0}, {10, 0, 0}, sphere({5, 0, 0}, 1)));
}

TEST(Geometry, SegmentClearOfSphere) {
  EXPECT_FALSE(segment_intersects_obstacle({0, 0, 0}, {10, 0, 0}, sphere({5, 5, 0}, 1)));
}

TEST(Geometry, GrazingSphereCountsAsHit) {
  // Closed-form point-segment distance equals the radius exactly.
  EXPECT_DOUBLE_EQ(point_segment_distance({5, 1, 0}, {0, 0, 0}, {10, 0, 0}), 1.0);
  EXPECT_TRUE(segment_intersects_obstacle({0, 0, 0}, {10, 0, 0}, sphere({5, 1, 0}, 1)));
}

TEST(Geometry, DegenerateSegmentIsPointTest) {
  EXPECT_TRUE(segment_intersects_obstacle({1, 1, 1}, {1, 1, 1}, box({0, 0, 0}, {2, 2, 2})));
  EXPECT_FALSE(segment_intersects_obstacle({3, 1, 1}, {3, 1, 1}, box({0, 0, 0}, {2, 2, 2})));
}

TEST(Geometry, ObstacleValidation) {
  EXPECT_THROW(validate_obstacle(sphere({0, 0, 0}, 0)), ValidationError);
  EXPECT_THROW(validate_obstacle(box({0, 0, 0}, {1, 0, 1})), ValidationError);
  EXPECT_THROW(validate_obstacle(cylinder({0, 0, 0}, 1, -1)), ValidationError);
  EXPECT_NO_THROW(validate_obstacle(cylinder({0, 0, 0}, 1, 1)));
}

TEST(Geometry, SegmentMatchesDenseSamplingOracle) {
  RandomStream rng(7, "segment-oracle");
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    Obstacle obs;
    switch (i % 3) {
      case 0: obs = sphere({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)}, rng.uniform(0.5, 4)); break;
      case 1: {
        Vec3 lo(rng.uniform(-5, 3), rng.uniform(-5, 3), rng.uniform(-5, 3));
        Vec3 size(rng.uniform(0.5, 5), rng.uniform(0.5, 5), rng.uniform(0.5, 5));
        obs = box(lo, lo + size);
        break;
      }
      default:
        obs = cylinder({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 0)}, rng.uniform(0.5, 4),
                       rng.uniform(1, 8));
    }
    const Vec3 a(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
    const Vec3 b(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
    constexpr int kSamples = 10000;
    bool sampled_hit = false;
    double min_dist = 1e9;
    for (int k = 0; k <= kSamples; ++k) {
      const Vec3 p = a + (b - a) * (static_cast<double>(k) / kSamples);
      sampled_hit |= point_in_obstacle(p, obs);
      min_dist = std::min(min_dist, distance_to_obstacle(p, obs));
    }
    // Skip near-tangent cases the sampling cannot resolve.
    const double step = (b - a).norm() / kSamples;
    if (!sampled_hit && min_dist < step) continue;
    ++checked;
    ASSERT_EQ(segment_intersects_obstacle(a, b, obs), sampled_hit) << "case " << i;
  }
  EXPECT_GT(checked, 990);
}

TEST(Geometry, RayHitsSphereAtClosedFormRange) {
  const auto t = ray_intersect(Vec3(0, 0, 0), Vec3(1, 0, 0), sphere({10, 0, 0}, 1));
  ASSERT_TRUE(t.has_value());
  EXPECT_NEAR(*t, 9.0, 1e-12);
  EXPECT_FALSE(ray_intersect(Vec3(0, 0, 0), Vec3(-1, 0, 0), sphere({10, 0, 0}, 1)).has_value());
}

TEST(Geometry, RayHitsBoxAndCylinder) {
  auto t = ray_intersect(Vec3(0, 0, 1), Vec3(1, 0, 0), box({4, -1, 0}, {6, 1, 2}));
  ASSERT_TRUE(t);
  EXPECT_NEAR(*t, 4.0, 1e-12);
  t = ray_intersect(Vec3(0, 0, 5), Vec3(1, 0, 0), cylinder({10, 0, 0}, 2, 20));
  ASSERT_TRUE(t);
  EXPECT_NEAR(*t, 8.0, 1e-12);
  EXPECT_FALSE(ray_intersect(Vec3(0, 0, 25), Vec3(1, 0, 0), cylinder({10, 0, 0}, 2, 20)));
}

TEST(NoFly, AboveCeilingIsClear) {
  auto z = square_zone();
  EXPECT_FALSE(segment_intersects_nfz({-5, 5, 150}, {15, 5, 150}, z, 15));
}

TEST(NoFly, CrossingInsideWindow) {
  auto z = square_zone();
  EXPECT_TRUE(segment_intersects_nfz({-5, 5, 50}, {15, 5, 50}, z, 15));
  EXPECT_FALSE(segment_intersects_nfz({-5, 5, 50}, {15, 5, 50}, z, 9));
  EXPECT_FALSE(segment_intersects_nfz({-5, 5, 50}, {15, 5, 50}, z, 21));
}

TEST(NoFly, EndpointOnEdgeIsInside) {
  auto z = square_zone();
  // Oracle: every edge's half-plane sign test is >= 0 for the endpoint.
  const Vec2 p(0, 5);
  for (std::size_t i = 0; i < z.footprint.size(); ++i) {
    const Vec2 e = z.footprint[(i + 1) % 4] - z.footprint[i];
    const Vec2 d = p - z.footprint[i];
    EXPECT_GE(e.x() * d.y() - e.y() * d.x(), 0.0);
  }
  EXPECT_TRUE(segment_intersects_nfz({-5, 5, 50}, {0, 5, 50}, z, 15));
  EXPECT_FALSE(segment_intersects_nfz({-5, 5, 50}, {-0.01, 5, 50}, z, 15));
}

TEST(NoFly, ValidationRejectsBadFootprints) {
  auto z = square_zone();
  std::reverse(z.footprint.begin(), z.footprint.end());
  EXPECT_THROW(validate_zone(z), ValidationError);
  z = square_zone();
  z.footprint = {Vec2(0, 0), Vec2(10, 0), Vec2(2, 2), Vec2(0, 10)};
  EXPECT_THROW(validate_zone(z), ValidationError);
  z = square_zone();
  z.floor = 200;
  EXPECT_THROW(validate_zone(z), ValidationError);
  EXPECT_NO_THROW(validate_zone(square_zone()));
}

TEST(Random, SameSeedAndKeyReproduce) {
  RandomStream a(99, "bus/uav"), b(99, "bus/uav");
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Random, DistinctKeysDiffer) {
  RandomStream a(99, "bus/uav"), b(99, "bus/plan");
  int equal = 0;
  double mean_a = 0, mean_b = 0;
  for (int i = 0; i < 10000; ++i) {
    const double x = a.uniform01(), y = b.uniform01();
    equal += x == y;
    mean_a += x;
    mean_b += y;
  }
  EXPECT_EQ(equal, 0);
  EXPECT_NEAR(mean_a / 10000, 0.5, 0.02);
  EXPECT_NEAR(mean_b / 10000, 0.5, 0.02);
}

TEST(Random, UniformIntStaysInRange) {
  RandomStream r(1, "int");
  std::array<int, 4> counts{};
  for (int i = 0; i < 4000; ++i) {
    const auto v = r.uniform_int(0, 3);
    ASSERT_GE(v, 0);
    ASSERT_LE(v, 3);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) EXPECT_GT(c, 850);
}

TEST(Clock, ElapsedDerivedFromTick) {
  SimClock clock(30, 8);
  for (int i = 0; i < 100000; ++i) clock.advance();
  EXPECT_EQ(clock.elapsed(), 100000 * clock.tick_duration());
  EXPECT_DOUBLE_EQ(clock.physics_dt(), 1.0 / 240.0);
  EXPECT_THROW(SimClock(0, 8), ValidationError);
}
