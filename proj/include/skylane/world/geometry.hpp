#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "skylane/world/types.hpp"

namespace skylane {

struct Sphere {
  LocalPoint center = LocalPoint::Zero();
  double radius = 1.0;
};

/// Axis-aligned box, closed.
struct Box {
  LocalPoint min = LocalPoint::Zero();
  LocalPoint max = LocalPoint::Ones();
};

/// Vertical cylinder; `base` is the center of the bottom disk, the solid
/// spans [base.z, base.z + height].
struct Cylinder {
  LocalPoint base = LocalPoint::Zero();
  double radius = 1.0;
  double height = 1.0;
};

using Shape = std::variant<Sphere, Box, Cylinder>;

struct Obstacle {
  std::uint32_t id = 0;
  Shape shape;
  bool dynamic = false;
  Vec3 velocity = Vec3::Zero();
};

/// Throws ValidationError on non-positive radius/height or an inverted box.
void validate_obstacle(const Obstacle& obs);

/// The obstacle translated by `offset` (used to advance dynamic obstacles).
Obstacle translated(const Obstacle& obs, const Vec3& offset);

bool point_in_obstacle(const LocalPoint& p, const Obstacle& obs);
/// Euclidean distance from `p` to the closed solid (0 inside).
double distance_to_obstacle(const LocalPoint& p, const Obstacle& obs);
/// Closed segment vs closed solid. a == b degenerates to a point test.
bool segment_intersects_obstacle(const LocalPoint& a, const LocalPoint& b, const Obstacle& obs);
/// Nearest t >= 0 with origin + t*dir on the solid's surface (dir unit length).
/// Rays starting inside the solid report t = 0.
std::optional<double> ray_intersect(const LocalPoint& origin, const Vec3& dir, const Obstacle& obs);
std::optional<double> ray_intersect(const LocalPoint& origin, const Vec3& dir, const Sphere& s);

/// Point-segment distance, shared by several modules.
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);
/// Closest point on [a, b] to p and its parameter in [0, 1].
Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b, double* t_out = nullptr);
/// Minimum distance between two closed segments.
double segment_segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);

struct NoFlyZone {
  std::uint32_t id = 0;
  std::vector<Vec2> footprint;  // convex, counterclockwise (east, north)
  double floor = 0.0;
  double ceiling = 0.0;
  Tick active_from = 0;
  Tick active_until = ~Tick{0};

  bool active_at(Tick t) const { return t >= active_from && t <= active_until; }
};

/// Throws ValidationError unless the footprint is a convex CCW polygon with
/// at least three vertices and floor < ceiling.
void validate_zone(const NoFlyZone& zone);

/// Closed test: tick inside the window, 2D projection meets the footprint and
/// the segment's altitude span overlaps [floor, ceiling].
bool segment_intersects_nfz(const LocalPoint& a, const LocalPoint& b, const NoFlyZone& zone, Tick at_tick);

/// 2D closed segment vs closed convex CCW polygon.
bool segment_intersects_convex_polygon(const Vec2& a, const Vec2& b, const std::vector<Vec2>& poly);

/// {id, shape: sphere|box|cylinder, center/radius | min/max | base/radius/height,
/// dynamic, velocity}. Validates the result.
Obstacle obstacle_from_json(const nlohmann::json& j);
nlohmann::json obstacle_to_json(const Obstacle& o);
/// {id, footprint: [[e, n], ...], floor, ceiling, active_from, active_until}.
NoFlyZone zone_from_json(const nlohmann::json& j);
nlohmann::json zone_to_json(const NoFlyZone& z);

}  // namespace skylane
