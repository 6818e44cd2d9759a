#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "skylane/engine/collision.hpp"
#include "skylane/engine/engine.hpp"
#include "skylane/errors.hpp"
#include "skylane/world/random.hpp"

using namespace skylane;

namespace {

Scenario square(int uavs_per_home = 1) {
  Scenario s;
  auto& net = s.network;
  net.nodes[1] = {1, {0, 0, 30}};
  net.nodes[2] = {2, {150, 0, 30}};
  net.nodes[3] = {3, {150, 150, 30}};
  net.nodes[4] = {4, {0, 150, 30}};
  net.airways[1] = {1, 1, 2, 10.0, true, 6};
  net.airways[2] = {2, 2, 3, 10.0, true, 6};
  net.airways[3] = {3, 3, 4, 10.0, true, 6};
  net.airways[4] = {4, 4, 1, 10.0, true, 6};
  net.airports[1] = {1, {-30, -30, 0}, 1, 2};
  net.airports[2] = {2, {180, 180, 0}, 3, 2};
  UavId id = 1;
  for (AirportId home : {1u, 2u}) {
    for (int i = 0; i < uavs_per_home; ++i) {
      FleetEntry f;
      f.id = id++;
      f.home = home;
      s.fleet.push_back(f);
    }
  }
  s.demands = {{1, 1, 2, 0, ""}, {2, 2, 1, 0, ""}};
  s.seed = 3;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<CollisionEvent> brute(const std::vector<CollisionBody>& bodies, const std::vector<Obstacle>& obs, Tick t) {
  std::vector<CollisionEvent> out;
  for (std::size_t i = 0; i < bodies.size(); ++i)
    for (std::size_t j = i + 1; j < bodies.size(); ++j) {
      const auto& a = bodies[i];
      const auto& b = bodies[j];
      if ((a.position - b.position).norm() < a.radius + b.radius)
        out.push_back({t, CollisionKind::kUavUav, {std::min(a.uav, b.uav), std::max(a.uav, b.uav)}, {}});
    }
  for (const auto& b : bodies) {
    for (const auto& o : obs)
      if (distance_to_obstacle(b.position, o) < b.radius) out.push_back({t, CollisionKind::kUavObstacle, {b.uav, o.id}, {}});
    if (!b.ground_exempt && b.position.z() < 0) out.push_back({t, CollisionKind::kUavGround, {b.uav}, {}});
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return std::tie(x.kind, x.entities) < std::tie(y.kind, y.entities);
  });
  return out;
}

}  // namespace

TEST(Collision, FarApartNoEvent) {
  std::vector<CollisionBody> b = {{1, {0, 0, 10}, 0.5}, {2, {100, 0, 10}, 0.5}};
  EXPECT_TRUE(detect_collisions(b, {}, 20, 0).empty());
}

TEST(Collision, ContactBoundary) {
  std::vector<CollisionBody> b = {{1, {0, 0, 10}, 0.5}, {2, {0.9, 0, 10}, 0.5}};
  const auto ev = detect_collisions(b, {}, 20, 4);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, CollisionKind::kUavUav);
  EXPECT_EQ(ev[0].entities, (std::vector<std::uint32_t>{1, 2}));
  b[1].position.x() = 1.0;
  EXPECT_TRUE(detect_collisions(b, {}, 20, 4).empty());
}

TEST(Collision, ObstacleAndGround) {
  Obstacle o;
  o.id = 9;
  o.shape = Box{{10, -1, 0}, {12, 1, 20}};
  std::vector<CollisionBody> b = {{1, {9.6, 0, 5}, 0.5}, {2, {0, 0, -0.1}, 0.5}, {3, {5, 5, -0.1}, 0.5, true}};
  const auto ev = detect_collisions(b, std::vector<Obstacle>{o}, 20, 0);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].kind, CollisionKind::kUavObstacle);
  EXPECT_EQ(ev[0].entities, (std::vector<std::uint32_t>{1, 9}));
  EXPECT_EQ(ev[1].kind, CollisionKind::kUavGround);
  EXPECT_EQ(ev[1].entities, std::vector<std::uint32_t>{2});
}

TEST(Collision, SpatialHashMatchesAllPairsOn1000Configurations) {
  RandomStream rng(2024, "collision-oracle");
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(0, 100));
    const double extent = rng.uniform(2.0, 60.0);
    std::vector<CollisionBody> bodies;
    for (int i = 0; i < n; ++i) {
      CollisionBody b;
      b.uav = static_cast<UavId>(i + 1);
      b.position = {rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-1.0, extent)};
      b.radius = rng.uniform(0.2, 1.5);
      b.ground_exempt = rng.bernoulli(0.3);
      bodies.push_back(b);
    }
    std::vector<Obstacle> obs;
    for (int k = 0; k < 3; ++k) {
      Obstacle o;
      o.id = 1000 + k;
      const LocalPoint c(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(0, extent));
      if (k == 0) o.shape = Sphere{c, rng.uniform(0.5, 5)};
      if (k == 1) o.shape = Box{c, c + Vec3(rng.uniform(0.5, 5), rng.uniform(0.5, 5), rng.uniform(0.5, 5))};
      if (k == 2) o.shape = Cylinder{c, rng.uniform(0.5, 4), rng.uniform(1, 10)};
      obs.push_back(o);
    }
    const double cell = rng.uniform(0.5, 25.0);
    ASSERT_EQ(detect_collisions(bodies, obs, cell, 0), brute(bodies, obs, 0)) << "trial " << trial;
  }
}

TEST(Engine, InvalidScenarioRejectedWithViolations) {
  auto s = square();
  s.demands.push_back({3, 1, 1, 0, ""});
  s.network.airways[5] = {5, 1, 9, 10.0, true, 4};
  try {
    Engine e(s);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("demand-same-airport"), std::string::npos);
    EXPECT_NE(what.find("airway-endpoints"), std::string::npos);
  }
}

TEST(Engine, EmptyScenarioTerminatesImmediately) {
  auto s = square();
  s.demands.clear();
  Engine e(s);
  const auto r = e.run();
  EXPECT_EQ(r.ticks, 0u);
  EXPECT_EQ(r.stop_reason, "empty");
  EXPECT_TRUE(r.collisions.empty());
  EXPECT_EQ(r.stats.completed, 0u);
}

TEST(Engine, TwoOpposingFlightsComplete) {
  Engine e(square());
  std::size_t max_mismatch = 0;
  while (e.step()) {
    std::size_t in_flight = 0;
    for (const auto& m : e.scenario().demands) {
      const auto rec = e.plan_record(m.id);
      if (!rec["status"].is_null() && is_in_flight(plan_state_from(rec["status"]["state"]))) ++in_flight;
    }
    max_mismatch = std::max(max_mismatch, in_flight > e.active_count() ? in_flight - e.active_count()
                                                                      : e.active_count() - in_flight);
  }
  const auto r = e.finish();
  EXPECT_EQ(r.stop_reason, "all_terminal");
  for (const auto& m : r.missions) EXPECT_EQ(m.state, "completed") << m.plan;
  EXPECT_TRUE(r.collisions.empty());
  EXPECT_EQ(r.stats.completed, 2u);
  EXPECT_EQ(max_mismatch, 0u);
  EXPECT_EQ(e.active_count(), 0u);
  EXPECT_GE(r.min_separation, TrafficParams{}.s_stop());
}
