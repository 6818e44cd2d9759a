#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "skylane/world/geometry.hpp"
#include "skylane/world/random.hpp"

namespace skylane {

struct LidarConfig {
  int channels = 12;
  double vfov_min_deg = -5.0;
  double vfov_max_deg = 5.0;
  double horizontal_resolution_deg = 1.0;
  double max_range = 30.0;
  int scan_rate = 1;  // full scans per control period
};

/// Throws ValidationError when the config is inconsistent (channels < 1,
/// inverted vertical FOV, resolution not dividing 360).
void validate_lidar(const LidarConfig& cfg);
LidarConfig lidar_from_json(const nlohmann::json& j);
nlohmann::json lidar_to_json(const LidarConfig& cfg);

/// Evenly spaced channel elevations across the vertical FOV (radians).
std::vector<double> channel_elevations(const LidarConfig& cfg);

struct LidarPoint {
  double range = 0.0;      // m
  double azimuth = 0.0;    // rad, CCW from sensor forward
  double elevation = 0.0;  // rad, up positive
};

struct PointCloud {
  std::vector<LidarPoint> points;
  Tick scan_tick = 0;
};

/// Environmental degradation applied to a scan (fog).
struct LidarEffects {
  double dropout_prob = 0.0;
  double range_scale = 1.0;
};

/// Casts one ray per (channel, azimuth step) from `position` against the
/// obstacles and the spheres of other vehicles. The sensor
/// frame is yaw-aligned with the vehicle and held level. Misses are omitted.
/// `rng` is consulted only when effects.dropout_prob > 0.
PointCloud scan_lidar(const LocalPoint& position, double yaw, const LidarConfig& cfg,
                      std::span<const Obstacle> obstacles, std::span<const Sphere> others, Tick tick,
                      const LidarEffects& effects = {}, RandomStream* rng = nullptr);

/// Vehicle yaw (rad, CCW from east) of a body-to-world attitude.
double yaw_of(const Quat& q);

}  // namespace skylane
