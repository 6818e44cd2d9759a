#include "skylane/engine/collision.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace skylane {
namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

CellKey cell_of(const LocalPoint& p, double size) {
  return {static_cast<std::int64_t>(std::floor(p.x() / size)), static_cast<std::int64_t>(std::floor(p.y() / size)),
          static_cast<std::int64_t>(std::floor(p.z() / size))};
}

}  // namespace

const char* collision_kind_name(CollisionKind k) {
  switch (k) {
    case CollisionKind::kUavUav: return "uav-uav";
    case CollisionKind::kUavObstacle: return "uav-obstacle";
    case CollisionKind::kUavGround: return "uav-ground";
  }
  return "unknown";
}

nlohmann::json collision_to_json(const CollisionEvent& e) {
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& p : e.positions) pos.push_back({p.x(), p.y(), p.z()});
  return {{"type", "collision"}, {"tick", e.tick}, {"kind", collision_kind_name(e.kind)}, {"entities", e.entities},
          {"positions", pos}};
}

std::vector<CollisionEvent> detect_collisions(std::span<const CollisionBody> bodies,
                                              std::span<const Obstacle> obstacles, double cell_size, Tick tick,
                                              double ground_z) {
  std::vector<CollisionEvent> out;
  double max_r = 0.0;
  for (const auto& b : bodies) max_r = std::max(max_r, b.radius);
  // Cells must be at least one contact diameter wide for a 27-cell search.
  const double size = std::max(cell_size, 2.0 * max_r + 1e-9);

  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
  grid.reserve(bodies.size() * 2);
  for (std::size_t i = 0; i < bodies.size(); ++i) grid[cell_of(bodies[i].position, size)].push_back(i);

  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const CellKey c = cell_of(bodies[i].position, size);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i) continue;
            const auto& a = bodies[i];
            const auto& b = bodies[j];
            if ((a.position - b.position).norm() < a.radius + b.radius) {
              const bool swap = b.uav < a.uav;
              const auto& lo = swap ? b : a;
              const auto& hi = swap ? a : b;
              out.push_back({tick, CollisionKind::kUavUav, {lo.uav, hi.uav}, {lo.position, hi.position}});
            }
          }
        }
  }
  for (const auto& b : bodies) {
    for (const auto& o : obstacles)
      if (distance_to_obstacle(b.position, o) < b.radius)
        out.push_back({tick, CollisionKind::kUavObstacle, {b.uav, o.id}, {b.position}});
    if (!b.ground_exempt && (b.touched_ground || b.position.z() < ground_z))
      out.push_back({tick, CollisionKind::kUavGround, {b.uav}, {b.position}});
  }
  std::sort(out.begin(), out.end(), [](const CollisionEvent& x, const CollisionEvent& y) {
    if (x.kind != y.kind) return x.kind < y.kind;
    return x.entities < y.entities;
  });
  return out;
}

}  // namespace skylane
