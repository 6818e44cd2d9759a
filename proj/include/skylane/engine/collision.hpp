#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylane/world/geometry.hpp"
#include "skylane/world/types.hpp"

namespace skylane {

enum class CollisionKind { kUavUav, kUavObstacle, kUavGround };
const char* collision_kind_name(CollisionKind k);

struct CollisionEvent {
  Tick tick = 0;
  CollisionKind kind = CollisionKind::kUavUav;
  std::vector<std::uint32_t> entities;  // uav ids; obstacle id second for uav-obstacle
  std::vector<LocalPoint> positions;

  bool operator==(const CollisionEvent& o) const {
    return tick == o.tick && kind == o.kind && entities == o.entities;
  }
};

nlohmann::json collision_to_json(const CollisionEvent& e);

struct CollisionBody {
  UavId uav = 0;
  LocalPoint position = LocalPoint::Zero();
  double radius = 0.5;
  bool ground_exempt = false;  // taking off or landing
  bool touched_ground = false; // ground clamp engaged during the tick
};

/// All uav-uav pairs with center distance < r_i + r_j, uav-obstacle contacts
/// (sphere vs solid) and uav-ground events (altitude below `ground_z`
/// outside takeoff/landing). Broad phase is a uniform spatial hash of
/// `cell_size`; output is sorted by (kind, entities).
std::vector<CollisionEvent> detect_collisions(std::span<const CollisionBody> bodies,
                                              std::span<const Obstacle> obstacles, double cell_size, Tick tick,
                                              double ground_z = 0.0);

}  // namespace skylane
