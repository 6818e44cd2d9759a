#include "skylane/sensing/lidar.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "skylane/errors.hpp"

namespace skylane {
namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

void validate_lidar(const LidarConfig& c) {
  if (c.channels < 1) throw ValidationError("lidar: channels must be >= 1");
  if (!(c.vfov_min_deg < c.vfov_max_deg) && c.channels > 1) throw ValidationError("lidar: vertical FOV inverted");
  if (!(c.horizontal_resolution_deg > 0.0)) throw ValidationError("lidar: resolution must be > 0");
  const double steps = 360.0 / c.horizontal_resolution_deg;
  if (std::abs(steps - std::round(steps)) > 1e-9) throw ValidationError("lidar: resolution must divide 360");
  if (!(c.max_range > 0.0)) throw ValidationError("lidar: max_range must be > 0");
  if (c.scan_rate < 1) throw ValidationError("lidar: scan_rate must be >= 1");
}

LidarConfig lidar_from_json(const nlohmann::json& j) {
  LidarConfig c;
  c.channels = j.value("channels", c.channels);
  if (j.contains("vertical_fov")) {
    c.vfov_min_deg = j["vertical_fov"].at(0).get<double>();
    c.vfov_max_deg = j["vertical_fov"].at(1).get<double>();
  }
  c.horizontal_resolution_deg = j.value("horizontal_resolution", c.horizontal_resolution_deg);
  c.max_range = j.value("max_range", c.max_range);
  c.scan_rate = j.value("scan_rate", c.scan_rate);
  validate_lidar(c);
  return c;
}

nlohmann::json lidar_to_json(const LidarConfig& c) {
  return {{"channels", c.channels},
          {"vertical_fov", {c.vfov_min_deg, c.vfov_max_deg}},
          {"horizontal_fov", {0.0, 360.0}},
          {"horizontal_resolution", c.horizontal_resolution_deg},
          {"max_range", c.max_range},
          {"scan_rate", c.scan_rate}};
}

std::vector<double> channel_elevations(const LidarConfig& c) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(c.channels));
  if (c.channels == 1) {
    out.push_back(0.5 * (c.vfov_min_deg + c.vfov_max_deg) * kDeg);
    return out;
  }
  const double step = (c.vfov_max_deg - c.vfov_min_deg) / (c.channels - 1);
  for (int i = 0; i < c.channels; ++i) out.push_back((c.vfov_min_deg + i * step) * kDeg);
  return out;
}

double yaw_of(const Quat& q) {
  const Vec3 nose = q * Vec3::UnitX();
  return std::atan2(nose.y(), nose.x());
}

PointCloud scan_lidar(const LocalPoint& position, double yaw, const LidarConfig& cfg,
                      std::span<const Obstacle> obstacles, std::span<const Sphere> others, Tick tick,
                      const LidarEffects& effects, RandomStream* rng) {
  PointCloud cloud;
  cloud.scan_tick = tick;
  const double max_range = cfg.max_range * effects.range_scale;

  // Only solids that can be reached within range.
  std::vector<const Obstacle*> near;
  for (const Obstacle& o : obstacles) {
    if (distance_to_obstacle(position, o) <= max_range) near.push_back(&o);
  }
  std::vector<const Sphere*> near_spheres;
  for (const Sphere& s : others) {
    if ((s.center - position).norm() - s.radius <= max_range) near_spheres.push_back(&s);
  }
  const bool dropout = effects.dropout_prob > 0.0 && rng != nullptr;
  if (near.empty() && near_spheres.empty() && !dropout) return cloud;

  const auto elevations = channel_elevations(cfg);
  const int steps = static_cast<int>(std::lround(360.0 / cfg.horizontal_resolution_deg));
  for (double el : elevations) {
    const double ce = std::cos(el), se = std::sin(el);
    for (int k = 0; k < steps; ++k) {
      const double az = k * cfg.horizontal_resolution_deg * kDeg;
      const double world_az = yaw + az;
      const Vec3 dir(ce * std::cos(world_az), ce * std::sin(world_az), se);
      double best = std::numeric_limits<double>::infinity();
      for (const Obstacle* o : near) {
        if (auto t = ray_intersect(position, dir, *o); t && *t < best) best = *t;
      }
      for (const Sphere* s : near_spheres) {
        if (auto t = ray_intersect(position, dir, *s); t && *t < best) best = *t;
      }
      // One draw per ray keeps the stream aligned regardless of hits.
      const bool dropped = dropout && rng->bernoulli(effects.dropout_prob);
      if (best > max_range || best <= 0.0 || dropped) continue;
      cloud.points.push_back({best, az, el});
    }
  }
  return cloud;
}

}  // namespace skylane
