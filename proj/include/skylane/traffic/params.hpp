#pragma once

#include <json.hpp>

#include "skylane/world/types.hpp"

namespace skylane {

struct TrafficParams {
  double s_min = 15.0;        // m, separation below which followers slow
  double node_radius = 8.0;   // m, mutual-exclusion zone around nodes
  double cruise_speed = 8.0;  // m/s along airways and connectors
  double climb_speed = 4.0;   // m/s
  double descent_speed = 2.0; // m/s
  double acceptance_radius = 3.0;
  double settle_radius = 8.0;   // m, a vehicle at rest this close counts as arrived
  double settle_speed = 0.3;    // m/s
  double lane_offset = 5.0;   // m, right of the direction of travel
  double pad_spacing = 12.0;
  double request_distance = 60.0;  // m before a node at which ownership is requested
  double lateral_clearance = 4.0;  // m, forward-conflict corridor half-width
  Tick resubmit_after = 60;        // ticks without a decision before resubmitting
  double touchdown_altitude = 0.1;
  double touchdown_speed = 0.2;
  double landing_depth = 0.3;  // m below the pad targeted by the final descent
  double separation_buffer = 2.5;  // m added to s_stop when commanding followers

  double s_stop() const { return 0.5 * s_min; }
  /// Distance from a node at which an approaching vehicle without ownership stops.
  double hold_distance() const { return node_radius + s_min; }
  /// Distance from a node to the connector gate point toward its airport.
  double gate_distance() const { return hold_distance() + 2.0; }
};

void validate_traffic_params(const TrafficParams& p);
TrafficParams traffic_params_from_json(const nlohmann::json& j, TrafficParams base = {});
nlohmann::json traffic_params_to_json(const TrafficParams& p);

}  // namespace skylane
