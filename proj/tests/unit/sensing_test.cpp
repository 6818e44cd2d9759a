#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "skylane/errors.hpp"
#include "skylane/sensing/lidar.hpp"
#include "skylane/sensing/vfh.hpp"

using namespace skylane;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

Vec3 ray_dir(double yaw, const LidarPoint& p) {
  const double az = yaw + p.azimuth;
  return {std::cos(p.elevation) * std::cos(az), std::cos(p.elevation) * std::sin(az), std::sin(p.elevation)};
}

// Closed-form nearest positive root of |o + t d - c|^2 = r^2.
std::optional<double> sphere_oracle(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  const Vec3 oc = o - c;
  const double b = oc.dot(d);
  const double disc = b * b - (oc.squaredNorm() - r * r);
  if (disc < 0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t > 0) return t;
  return std::nullopt;
}

std::optional<double> box_oracle(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi) {
  double t0 = 0, t1 = 1e300;
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0) {
      if (o[i] < lo[i] || o[i] > hi[i]) return std::nullopt;
      continue;
    }
    double a = (lo[i] - o[i]) / d[i], b = (hi[i] - o[i]) / d[i];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t0 > t1) return std::nullopt;
  return t0;
}

PolarHistogram make_hist(std::vector<double> density, double threshold) {
  PolarHistogram h;
  h.sector_width_deg = 360.0 / static_cast<double>(density.size());
  h.threshold = threshold;
  h.raw = density;
  h.density = std::move(density);
  return h;
}

// Independent formulation: nearest free sector overall, then its valley.
int oracle_sector(const PolarHistogram& h, int target, int s_max, bool& stop, bool& unchanged) {
  const int n = h.sectors();
  std::vector<bool> free(n);
  int nfree = 0;
  for (int k = 0; k < n; ++k) nfree += (free[k] = h.density[k] < h.threshold);
  stop = nfree == 0;
  unchanged = false;
  if (stop) return -1;
  if (nfree == n) {
    unchanged = true;
    return target;
  }
  int near = -1, best = n + 1;
  for (int k = 0; k < n; ++k) {
    if (!free[k]) continue;
    const int d = std::min(std::abs(k - target), n - std::abs(k - target));
    if (d < best) best = d, near = k;
  }
  int lo = near, hi = near;
  while (free[(lo - 1 + n) % n]) lo = (lo - 1 + n) % n;
  while (free[(hi + 1) % n]) hi = (hi + 1) % n;
  const int width = (hi - lo + n) % n + 1;
  if (width < s_max) return (lo + width / 2) % n;
  const int from_lo = (near - lo + n) % n;
  const int to_hi = (hi - near + n) % n;
  if (best == 0 && from_lo >= s_max / 2 && to_hi >= s_max / 2) {
    unchanged = true;
    return target;
  }
  if (best == 0) return from_lo < s_max / 2 ? (lo + s_max / 2) % n : (hi - s_max / 2 + n) % n;
  return near == lo ? (lo + s_max / 2) % n : (hi - s_max / 2 + n) % n;
}

}  // namespace

TEST(Lidar, EmptySceneGivesEmptyCloud) {
  const auto cloud = scan_lidar(Vec3::Zero(), 0.0, LidarConfig{}, {}, {}, 7);
  EXPECT_TRUE(cloud.points.empty());
  EXPECT_EQ(cloud.scan_tick, 7u);
}

TEST(Lidar, SphereAheadBoresightRange) {
  LidarConfig cfg;
  cfg.channels = 3;  // includes a zero-elevation channel
  const std::vector<Obstacle> obs{{1, Sphere{Vec3(10, 0, 5), 1.0}, false, Vec3::Zero()}};
  const auto cloud = scan_lidar(Vec3(0, 0, 5), 0.0, cfg, obs, {}, 0);
  ASSERT_FALSE(cloud.points.empty());
  double min_range = 1e9;
  for (const auto& p : cloud.points) min_range = std::min(min_range, p.range);
  EXPECT_NEAR(min_range, 9.0, 1e-6);
}

TEST(Lidar, YawRotatesSensorFrame) {
  LidarConfig cfg;
  cfg.channels = 1;
  const std::vector<Obstacle> obs{{1, Sphere{Vec3(0, 10, 0), 1.0}, false, Vec3::Zero()}};
  const auto cloud = scan_lidar(Vec3::Zero(), kPi / 2, cfg, obs, {}, 0);
  double best_az = 0, best = 1e9;
  for (const auto& p : cloud.points)
    if (p.range < best) best = p.range, best_az = p.azimuth;
  EXPECT_NEAR(best, 9.0, 1e-6);
  EXPECT_NEAR(best_az, 0.0, 1e-12);
}

TEST(Lidar, TwelveChannelElevations) {
  const auto el = channel_elevations(LidarConfig{});
  ASSERT_EQ(el.size(), 12u);
  for (int i = 0; i < 12; ++i) EXPECT_NEAR(el[i], (-5.0 + i * 10.0 / 11.0) * kDeg, 1e-15);
}

TEST(Lidar, ConfigValidation) {
  LidarConfig c;
  c.channels = 0;
  EXPECT_THROW(validate_lidar(c), ValidationError);
  c = {};
  c.horizontal_resolution_deg = 7.0;
  EXPECT_THROW(validate_lidar(c), ValidationError);
  c = {};
  c.vfov_min_deg = 5;
  c.vfov_max_deg = -5;
  EXPECT_THROW(validate_lidar(c), ValidationError);
  EXPECT_NO_THROW(lidar_from_json(lidar_to_json(LidarConfig{})));
}

TEST(Lidar, RangesMatchClosedFormOracles) {
  RandomStream rng(11, "lidar-oracle");
  LidarConfig cfg;
  cfg.horizontal_resolution_deg = 2.0;
  for (int trial = 0; trial < 40; ++trial) {
    const Vec3 pos(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 1));
    const double yaw = rng.uniform(-kPi, kPi);
    const Vec3 c(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-1, 1));
    const double r = rng.uniform(0.5, 4);
    const Vec3 lo(rng.uniform(-25, 25), rng.uniform(-25, 25), rng.uniform(-3, 0));
    const Vec3 hi = lo + Vec3(rng.uniform(1, 6), rng.uniform(1, 6), rng.uniform(1, 4));
    std::vector<Obstacle> obs{{1, Sphere{c, r}, false, Vec3::Zero()}, {2, Box{lo, hi}, false, Vec3::Zero()}};
    if ((pos - c).norm() <= r || ((pos.array() >= lo.array()).all() && (pos.array() <= hi.array()).all())) continue;
    const auto cloud = scan_lidar(pos, yaw, cfg, obs, {}, 0);
    for (const auto& p : cloud.points) {
      EXPECT_GT(p.range, 0.0);
      EXPECT_LE(p.range, cfg.max_range);
      const Vec3 d = ray_dir(yaw, p);
      const auto ts = sphere_oracle(pos, d, c, r);
      const auto tb = box_oracle(pos, d, lo, hi);
      double truth = 1e300;
      if (ts) truth = std::min(truth, *ts);
      if (tb) truth = std::min(truth, *tb);
      EXPECT_GE(p.range, truth - 1e-6);
      EXPECT_NEAR(p.range, truth, 1e-6);
    }
  }
}

TEST(Lidar, FogDropoutMatchesBinomial) {
  LidarConfig cfg;
  const std::vector<Obstacle> obs{{1, Box{Vec3(-20, -20, -10), Vec3(20, 20, -2)}, false, Vec3::Zero()},
                                  {2, Box{Vec3(5, -20, -10), Vec3(8, 20, 10)}, false, Vec3::Zero()}};
  const auto clear = scan_lidar(Vec3::Zero(), 0.0, cfg, obs, {}, 0);
  ASSERT_GT(clear.points.size(), 100u);
  RandomStream rng(3, "fog");
  const double p = 0.3;
  const int scans = 100;
  std::size_t kept = 0;
  for (int s = 0; s < scans; ++s) kept += scan_lidar(Vec3::Zero(), 0.0, cfg, obs, {}, s, {p, 1.0}, &rng).points.size();
  const double n = static_cast<double>(clear.points.size()) * scans;
  const double sigma = std::sqrt(n * p * (1 - p));
  EXPECT_NEAR(static_cast<double>(kept), n * (1 - p), 3 * sigma);
}

TEST(Lidar, RangeScaleShortensReach) {
  const std::vector<Obstacle> obs{{1, Sphere{Vec3(20, 0, 0), 1.0}, false, Vec3::Zero()}};
  EXPECT_FALSE(scan_lidar(Vec3::Zero(), 0, LidarConfig{}, obs, {}, 0).points.empty());
  EXPECT_TRUE(scan_lidar(Vec3::Zero(), 0, LidarConfig{}, obs, {}, 0, {0.0, 0.5}).points.empty());
}

TEST(Lidar, OtherVehiclesAreSeen) {
  const std::vector<Sphere> others{{Vec3(5, 0, 0), 0.5}};
  LidarConfig cfg;
  cfg.channels = 1;
  const auto cloud = scan_lidar(Vec3::Zero(), 0, cfg, {}, others, 0);
  ASSERT_FALSE(cloud.points.empty());
  double m = 1e9;
  for (const auto& p : cloud.points) m = std::min(m, p.range);
  EXPECT_NEAR(m, 4.5, 1e-9);
}

TEST(Histogram, EmptyCloudAllZero) {
  const auto h = build_histogram({}, vfh_defaults(30));
  EXPECT_EQ(h.sectors(), 72);
  for (double d : h.density) EXPECT_EQ(d, 0.0);
}

TEST(Histogram, SinglePointNoSmoothing) {
  HistogramParams p = vfh_defaults(30);
  p.smoothing = 0;
  PointCloud c;
  c.points.push_back({12.0, 17.5 * kDeg, 0.0});
  const auto h = build_histogram(c, p);
  for (int k = 0; k < h.sectors(); ++k) EXPECT_EQ(h.density[k], k == 3 ? 60.0 - 12.0 : 0.0);
}

TEST(Histogram, PointsOutsideBandIgnored) {
  HistogramParams p = vfh_defaults(30);
  PointCloud c;
  c.points.push_back({25.0, 0.0, 5.0 * kDeg});  // 2.18 m above
  for (double d : build_histogram(c, p).density) EXPECT_EQ(d, 0.0);
}

TEST(Histogram, MatchesDirectSummation) {
  RandomStream rng(5, "hist-oracle");
  for (int trial = 0; trial < 50; ++trial) {
    HistogramParams p = vfh_defaults(30);
    p.smoothing = static_cast<int>(rng.uniform_int(0, 4));
    PointCloud c;
    const int n_pts = static_cast<int>(rng.uniform_int(1, 400));
    for (int i = 0; i < n_pts; ++i)
      c.points.push_back({rng.uniform(0.1, 30), rng.uniform(0, 2 * kPi), rng.uniform(-5, 5) * kDeg});
    const auto h = build_histogram(c, p);
    const int n = 72;
    std::vector<double> raw(n, 0.0);
    for (int k = 0; k < n; ++k)
      for (const auto& pt : c.points) {
        if (std::abs(pt.range * std::sin(pt.elevation)) > p.band_height) continue;
        if (static_cast<int>(std::floor(pt.azimuth / (5 * kDeg))) == k) raw[k] += std::max(0.0, p.a - p.b * pt.range);
      }
    const int l = p.smoothing;
    for (int k = 0; k < n; ++k) {
      double num = 0, den = 0;
      for (int i = -l; i <= l; ++i) {
        num += (l + 1 - std::abs(i)) * raw[(k + i + n) % n];
        den += l + 1 - std::abs(i);
      }
      EXPECT_NEAR(h.density[k], num / den, 1e-12);
    }
  }
}

TEST(Histogram, RotationalEquivariance) {
  RandomStream rng(9, "hist-rot");
  HistogramParams p = vfh_defaults(30);
  p.smoothing = 0;
  PointCloud c;
  for (int i = 0; i < 200; ++i) c.points.push_back({rng.uniform(1, 29), (rng.uniform_int(0, 71) + 0.5) * 5 * kDeg, 0});
  const auto base = build_histogram(c, p);
  for (int shift : {1, 7, 36, 71}) {
    PointCloud r = c;
    for (auto& pt : r.points) pt.azimuth = std::fmod(pt.azimuth + shift * 5 * kDeg, 2 * kPi);
    const auto h = build_histogram(r, p);
    for (int k = 0; k < 72; ++k) EXPECT_EQ(h.density[(k + shift) % 72], base.density[k]);
  }
}

TEST(SelectHeading, FreeSpaceKeepsTarget) {
  const auto h = make_hist(std::vector<double>(72, 0.0), 18.0);
  const auto s = select_heading(h, 1.234, 8);
  EXPECT_FALSE(s.stop);
  EXPECT_EQ(s.bearing, 1.234);
}

TEST(SelectHeading, BlockedTargetDeviates) {
  std::vector<double> d(72, 0.0);
  d[10] = 100;
  const auto h = make_hist(d, 18.0);
  const double target = h.sector_center(10);
  const auto s = select_heading(h, target, 8);
  EXPECT_FALSE(s.stop);
  EXPECT_NE(s.sector, 10);
  EXPECT_GE(std::abs(s.bearing - target), 5 * kDeg - 1e-12);
}

TEST(SelectHeading, AllBlockedStops) {
  const auto h = make_hist(std::vector<double>(72, 50.0), 18.0);
  EXPECT_TRUE(select_heading(h, 0.0, 8).stop);
}

TEST(SelectHeading, WideValleyEdgeOffset) {
  std::vector<double> d(72, 100.0);
  for (int k = 20; k < 40; ++k) d[k] = 0;
  const auto h = make_hist(d, 18.0);
  const auto s = select_heading(h, h.sector_center(10), 8);
  EXPECT_EQ(s.sector, 24);
  EXPECT_NEAR(s.bearing, h.sector_center(24), 1e-15);
}

TEST(SelectHeading, NarrowValleyCenter) {
  std::vector<double> d(72, 100.0);
  for (int k = 30; k < 35; ++k) d[k] = 0;
  const auto h = make_hist(d, 18.0);
  const auto s = select_heading(h, h.sector_center(0), 8);
  EXPECT_EQ(s.sector, 32);
  EXPECT_NEAR(s.bearing, 32.5 * 5 * kDeg, 1e-12);
}

TEST(SelectHeading, MatchesExhaustiveOracle) {
  RandomStream rng(21, "vfh-oracle");
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> d(72);
    const double p_block = rng.uniform(0.05, 0.95);
    for (auto& v : d) v = rng.bernoulli(p_block) ? rng.uniform(18, 100) : rng.uniform(0, 17.9);
    const auto h = make_hist(d, 18.0);
    const double target = rng.uniform(0, 2 * kPi);
    const int s_max = static_cast<int>(rng.uniform_int(2, 16));
    bool stop = false, unchanged = false;
    const int expect = oracle_sector(h, h.sector_of(target), s_max, stop, unchanged);
    const auto s = select_heading(h, target, s_max);
    ASSERT_EQ(s.stop, stop) << trial;
    if (stop) continue;
    ASSERT_EQ(s.sector, expect) << trial;
    if (unchanged) EXPECT_EQ(s.bearing, target);
    EXPECT_LT(h.density[h.sector_of(s.bearing)], h.threshold);
  }
}

TEST(SelectHeading, Deterministic) {
  std::vector<double> d(72, 0.0);
  for (int k = 0; k < 72; k += 3) d[k] = 40;
  const auto h = make_hist(d, 18.0);
  const auto a = select_heading(h, 0.3, 8), b = select_heading(h, 0.3, 8);
  EXPECT_EQ(a.bearing, b.bearing);
  EXPECT_EQ(a.sector, b.sector);
}

TEST(Override, UndeflectedKeepsSetpoint) {
  ControlSetpoint sp;
  sp.mode = SetpointMode::kWaypoint;
  sp.target = Vec3(50, 0, 18);
  sp.speed_limit = 5;
  const auto out = avoidance_override(sp, {false, 0.0, 0}, 0.0, 0.0, SpeedPolicy{});
  EXPECT_EQ(out.mode, SetpointMode::kWaypoint);
  EXPECT_EQ(out.target, sp.target);
  EXPECT_NEAR(out.speed_limit, 5.0, 1e-12);
}

TEST(Override, StopHoldsAltitude) {
  ControlSetpoint sp;
  sp.mode = SetpointMode::kWaypoint;
  sp.target = Vec3(50, 0, 18);
  const auto out = avoidance_override(sp, {true, 0.0, -1}, 0.0, 0.0, SpeedPolicy{});
  EXPECT_EQ(out.mode, SetpointMode::kVelocity);
  EXPECT_EQ(out.target, Vec3::Zero());
  ASSERT_TRUE(out.hold_altitude.has_value());
  EXPECT_EQ(*out.hold_altitude, 18.0);
}

TEST(Override, DeflectionScalesSpeed) {
  ControlSetpoint sp;
  sp.mode = SetpointMode::kWaypoint;
  sp.target = Vec3(50, 0, 18);
  const SpeedPolicy pol{};
  const auto out = avoidance_override(sp, {false, kPi / 2, 18}, 0.0, 9.0, pol);
  EXPECT_EQ(out.mode, SetpointMode::kVelocity);
  EXPECT_NEAR(out.target.x(), 0.0, 1e-12);
  EXPECT_NEAR(out.target.y(), 2.5, 1e-12);
  EXPECT_EQ(*out.hold_altitude, 18.0);
  const auto floor = avoidance_override(sp, {false, kPi / 2, 18}, 0.0, 100.0, pol);
  EXPECT_NEAR(floor.target.norm(), pol.cruise * pol.min_fraction, 1e-12);
}
