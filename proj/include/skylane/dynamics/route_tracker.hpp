#pragma once

#include <cstddef>
#include <vector>

#include "skylane/dynamics/state.hpp"

namespace skylane {

struct TrackResult {
  ControlSetpoint setpoint;
  std::size_t index = 0;
  bool final = false;
};

/// Waypoint follower. Advances past every route point already within
/// `acceptance_radius`; the last point is held in position-hold mode.
/// Precondition: route non-empty, `index` < route.size().
TrackResult track_route(const UavState& state, const std::vector<LocalPoint>& route, double acceptance_radius,
                        std::size_t index = 0, double speed_limit = 1e9, double yaw = 0.0);

}  // namespace skylane
