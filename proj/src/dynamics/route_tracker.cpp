#include "skylane/dynamics/route_tracker.hpp"

#include "skylane/errors.hpp"

namespace skylane {

TrackResult track_route(const UavState& state, const std::vector<LocalPoint>& route, double acceptance_radius,
                        std::size_t index, double speed_limit, double yaw) {
  if (route.empty()) throw ValidationError("track_route: empty route");
  if (index >= route.size()) index = route.size() - 1;
  while (index + 1 < route.size() && (route[index] - state.position).norm() <= acceptance_radius) ++index;

  TrackResult r;
  r.index = index;
  r.final = index + 1 == route.size();
  r.setpoint.mode = r.final ? SetpointMode::kPositionHold : SetpointMode::kWaypoint;
  r.setpoint.target = route[index];
  r.setpoint.speed_limit = speed_limit;
  r.setpoint.yaw = yaw;
  return r;
}

}  // namespace skylane
