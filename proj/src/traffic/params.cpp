#include "skylane/traffic/params.hpp"

#include "skylane/errors.hpp"

namespace skylane {

void validate_traffic_params(const TrafficParams& p) {
  const double positive[] = {p.s_min,          p.node_radius,        p.cruise_speed,      p.climb_speed,
                             p.descent_speed,  p.acceptance_radius,  p.pad_spacing,       p.request_distance,
                             p.lateral_clearance, p.touchdown_speed, p.landing_depth};
  for (double v : positive)
    if (!(v > 0.0)) throw ValidationError("traffic: distances and speeds must be positive");
  if (!(p.lane_offset >= 0.0)) throw ValidationError("traffic: lane_offset must be >= 0");
  if (!(p.settle_radius >= p.acceptance_radius)) throw ValidationError("traffic: settle_radius must be >= acceptance_radius");
  if (!(p.settle_speed >= 0.0)) throw ValidationError("traffic: settle_speed must be >= 0");
  if (p.settle_radius >= p.hold_distance()) throw ValidationError("traffic: settle_radius must be below the hold distance");
  if (!(p.separation_buffer >= 0.0)) throw ValidationError("traffic: separation_buffer must be >= 0");
  if (!(p.touchdown_altitude >= 0.0)) throw ValidationError("traffic: touchdown_altitude must be >= 0");
  if (p.request_distance <= p.hold_distance()) throw ValidationError("traffic: request_distance must exceed the hold distance");
  if (p.resubmit_after == 0) throw ValidationError("traffic: resubmit_after must be >= 1");
}

TrafficParams traffic_params_from_json(const nlohmann::json& j, TrafficParams p) {
  if (!j.is_object()) throw ValidationError("traffic: expected an object");
  p.s_min = j.value("s_min", p.s_min);
  p.node_radius = j.value("node_radius", p.node_radius);
  p.cruise_speed = j.value("cruise_speed", p.cruise_speed);
  p.climb_speed = j.value("climb_speed", p.climb_speed);
  p.descent_speed = j.value("descent_speed", p.descent_speed);
  p.acceptance_radius = j.value("acceptance_radius", p.acceptance_radius);
  p.lane_offset = j.value("lane_offset", p.lane_offset);
  p.pad_spacing = j.value("pad_spacing", p.pad_spacing);
  p.request_distance = j.value("request_distance", p.request_distance);
  p.lateral_clearance = j.value("lateral_clearance", p.lateral_clearance);
  p.resubmit_after = j.value("resubmit_after", p.resubmit_after);
  p.touchdown_altitude = j.value("touchdown_altitude", p.touchdown_altitude);
  p.touchdown_speed = j.value("touchdown_speed", p.touchdown_speed);
  p.landing_depth = j.value("landing_depth", p.landing_depth);
  p.separation_buffer = j.value("separation_buffer", p.separation_buffer);
  p.settle_radius = j.value("settle_radius", p.settle_radius);
  p.settle_speed = j.value("settle_speed", p.settle_speed);
  validate_traffic_params(p);
  return p;
}

nlohmann::json traffic_params_to_json(const TrafficParams& p) {
  return {{"s_min", p.s_min},
          {"node_radius", p.node_radius},
          {"cruise_speed", p.cruise_speed},
          {"climb_speed", p.climb_speed},
          {"descent_speed", p.descent_speed},
          {"acceptance_radius", p.acceptance_radius},
          {"lane_offset", p.lane_offset},
          {"pad_spacing", p.pad_spacing},
          {"request_distance", p.request_distance},
          {"lateral_clearance", p.lateral_clearance},
          {"resubmit_after", p.resubmit_after},
          {"touchdown_altitude", p.touchdown_altitude},
          {"touchdown_speed", p.touchdown_speed},
          {"landing_depth", p.landing_depth},
          {"separation_buffer", p.separation_buffer},
          {"settle_radius", p.settle_radius},
          {"settle_speed", p.settle_speed}};
}

}  // namespace skylane
