#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "skylane/airway/network.hpp"
#include "skylane/bus/bus.hpp"
#include "skylane/dynamics/state.hpp"
#include "skylane/traffic/params.hpp"
#include "skylane/traffic/plan.hpp"
#include "skylane/world/scenario.hpp"

namespace skylane {

/// uav/cmd/<id> payload.
struct UavCommand {
  UavId uav = 0;
  PlanId plan = 0;
  ControlSetpoint setpoint;
  AirwayId airway = 0;  // airway being flown, 0 off-network
  PlanState phase = PlanState::kTakingOff;
};

nlohmann::json command_to_json(const UavCommand& c, Tick now);
UavCommand command_from_json(const nlohmann::json& j);
nlohmann::json setpoint_to_json(const ControlSetpoint& s);
ControlSetpoint setpoint_from_json(const nlohmann::json& j);

/// Draft plan for a demand: shortest route over open airways between the
/// airports' linked nodes. No route yields an aborted(`unreachable`) plan.
FlightPlan plan_mission(const FlightDemand& demand, const AirwayNetwork& net, const std::set<AirwayId>& closed,
                        PlanId id, UavId uav);

/// One flown point of a plan's path.
struct Waypoint {
  LocalPoint point = LocalPoint::Zero();
  AirwayId airway = 0;         // airway reported while heading here
  NodeId approach_node = 0;    // node whose ownership gates the approach to this point
  NodeId start_node = 0;       // node that must be owned before leaving for this point
  std::size_t route_index = 0; // route nodes passed once this point is reached
  PlanState phase = PlanState::kEnroute;
};

/// Where a (re)built path begins: on the departure pad, at the hop across the
/// node that opens leg `first`, or partway along leg `first` (its lane end
/// is the first point).
enum class PathStart { kPad, kNodeHop, kLaneEnd };

/// Point on the line from an airport's node toward the airport, at cruise
/// altitude, through which connectors pass; nullopt when the airport sits on
/// its node.
std::optional<LocalPoint> connector_gate(const AirwayNetwork& net, AirportId airport, const TrafficParams& params);

/// Path through pads, connectors and lane-offset airway legs for route
/// `nodes`. Leg i joins nodes[i] and nodes[i + 1]; lanes sit `lane_offset` to
/// the right of the direction of travel.
std::vector<Waypoint> build_waypoints(const AirwayNetwork& net, const std::vector<NodeId>& nodes, PathStart start,
                                      std::size_t first, AirportId origin, AirportId destination,
                                      const LocalPoint& departure_pad, const LocalPoint& arrival_pad,
                                      const TrafficParams& params);

/// Input to separation: where a vehicle is and where it is heading.
struct SeparationEntry {
  UavId uav = 0;
  LocalPoint position = LocalPoint::Zero();
  Vec3 direction = Vec3::Zero();  // unit travel direction (zero when hovering)
  AirwayId airway = 0;
  int lane = 0;  // +1 flying a->b, -1 b->a, 0 off-airway
};

/// clamp((gap - s_stop) / (s_min - s_stop), 0, 1) with s_stop = s_min / 2.
double separation_scale(double gap, double s_min);

/// Speed scale per vehicle. On each airway lane, followers are ordered by
/// progress along the centerline and scaled by the gap to their leader;
/// independently, any vehicle directly ahead inside the `lateral_clearance`
/// corridor scales the follower. The smaller factor wins. When two vehicles
/// each see the other ahead, the lower id ignores the other.
std::map<UavId, double> separation_scales(std::span<const SeparationEntry> entries, double s_min,
                                          double lateral_clearance);

/// Node mutual exclusion. Requests are served FIFO by request tick, then
/// distance to the node at request time, then uav id.
/// Directed lane key; 0 means none.
using LaneKey = std::uint64_t;
inline LaneKey lane_key(NodeId from, NodeId to) { return (static_cast<LaneKey>(from) << 32) | to; }

class NodeGate {
 public:
  /// `in_lane` is the lane the vehicle arrives on; `out_lane` the one it
  /// enters once it owns the node.
  void request(NodeId node, UavId uav, Tick tick, double distance, LaneKey in_lane = 0, LaneKey out_lane = 0);
  void release(NodeId node, UavId uav);
  /// Drops every request and ownership of `uav`.
  void forget(UavId uav);
  /// Grants each free node to the first queued request that `admissible`
  /// accepts (all when empty).
  void grant(const std::function<bool(UavId uav, LaneKey in_lane, LaneKey out_lane)>& admissible = {});
  std::optional<UavId> owner(NodeId node) const;
  bool owns(NodeId node, UavId uav) const;
  bool requested(NodeId node, UavId uav) const;

 private:
  struct Request {
    Tick tick;
    double distance;
    UavId uav;
    LaneKey in_lane = 0;
    LaneKey out_lane = 0;
    bool operator<(const Request& o) const {
      if (tick != o.tick) return tick < o.tick;
      if (distance != o.distance) return distance < o.distance;
      return uav < o.uav;
    }
  };
  std::map<NodeId, std::set<Request>> queues_;
  std::map<NodeId, UavId> owners_;
};

/// The built-in traffic manager: plan lifecycle, takeoff and landing
/// control, command issuance, separation and re-planning.
class TrafficManager {
 public:
  explicit TrafficManager(const Scenario& scenario);

  /// Subscribes to plan/decision, uav/telemetry/* and airspace/state.
  void attach(MessageBus& bus);
  void step(Tick now);

  const std::map<PlanId, FlightPlan>& plans() const { return plans_; }
  bool all_terminal() const;

 private:
  enum class PadUse { kFree, kDeparture, kArrival };
  struct Pad {
    LocalPoint position;
    PadUse use = PadUse::kFree;
    PlanId plan = 0;
  };
  struct Known {
    LocalPoint position = LocalPoint::Zero();
    Vec3 velocity = Vec3::Zero();
    Tick tick = 0;
    bool valid = false;
    double health = 1.0;  // weakest motor
  };
  struct Flight {
    std::vector<Waypoint> path;
    std::size_t target = 0;
    Tick submitted_at = 0;
    Tick retry_at = 0;
    bool awaiting = false;
    bool held = false;
    Tick departure = 0;
    bool emergency = false;
  };

  void transition(FlightPlan& p, PlanState to, Tick now, const std::string& reason = {});
  void publish_state(const FlightPlan& p, Tick now, const char* event = nullptr);
  void submit(FlightPlan& p, Flight& f, Tick now);
  void handle_decision(const nlohmann::json& payload, Tick now);
  void handle_airspace(const nlohmann::json& payload, Tick now);
  void replan(FlightPlan& p, Flight& f, Tick now);
  void try_depart(FlightPlan& p, Flight& f, Tick now);
  /// Sends a vehicle with a motor fault straight down; the mission aborts on
  /// touchdown.
  void begin_emergency(FlightPlan& p, Flight& f, const LocalPoint& pos, Tick now);
  void fly(Tick now);
  void release_all(FlightPlan& p);
  std::optional<UavId> take_idle(AirportId airport);
  int free_pad(AirportId airport) const;
  LocalPoint current_position(const FlightPlan& p, const Flight& f) const;
  /// Leg index the vehicle is flying (or about to fly from the pad), or -1.
  int current_leg(const FlightPlan& p, const Flight& f) const;
  LaneKey in_lane(const FlightPlan& p, const Flight& f) const;
  LaneKey out_lane(const FlightPlan& p, NodeId node) const;
  /// Vehicles on or committed to each directed lane.
  std::map<LaneKey, std::size_t> lane_occupancy() const;
  /// The vehicle nearest the end of each occupied lane.
  std::map<LaneKey, UavId> lane_fronts() const;
  std::size_t lane_capacity(LaneKey lane) const;

  const AirwayNetwork* net_;
  TrafficParams params_;
  std::vector<FlightDemand> demands_;
  std::map<UavId, AirportId> home_;
  std::map<AirportId, std::set<UavId>> idle_;
  std::map<AirportId, std::vector<Pad>> pads_;
  std::map<PlanId, FlightPlan> plans_;
  std::map<PlanId, Flight> flights_;
  std::map<UavId, Known> known_;
  std::set<AirwayId> blocked_;
  std::set<AirportId> ground_stops_;
  NodeGate gate_;
  bool started_ = false;

  MessageBus* bus_ = nullptr;
  SubscriptionId sub_decision_ = 0, sub_telemetry_ = 0, sub_airspace_ = 0;
};

}  // namespace skylane
