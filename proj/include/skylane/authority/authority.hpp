#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylane/airway/network.hpp"
#include "skylane/authority/policy.hpp"
#include "skylane/bus/bus.hpp"
#include "skylane/traffic/plan.hpp"
#include "skylane/world/geometry.hpp"

namespace skylane {

enum class Verdict { kApproved, kRejected, kDeferred };
const char* verdict_name(Verdict v);

struct ApprovalDecision {
  PlanId plan = 0;
  Verdict verdict = Verdict::kDeferred;
  std::string reason;            // rejected / deferred
  Tick until = 0;                // deferred: earliest retry tick
  Tick assigned_departure = 0;   // approved
};

nlohmann::json decision_to_json(const ApprovalDecision& d);
ApprovalDecision decision_from_json(const nlohmann::json& j);

/// plan/submit payload.
struct PlanRequest {
  PlanId plan = 0;
  DemandId demand = 0;
  UavId uav = 0;
  AirportId origin = 0;
  AirportId destination = 0;
  std::vector<NodeId> route;
  Tick requested_departure = 0;
};

nlohmann::json request_to_json(const PlanRequest& r);
PlanRequest request_from_json(const nlohmann::json& j);

/// Current commitments the approval rule weighs a request against.
struct AirspaceLoad {
  std::map<AirwayId, int> reservations;                // active plans still to fly each airway
  std::map<AirportId, std::vector<std::vector<Tick>>> pad_slots;  // per airport, per pad: assigned departures
  std::set<AirwayId> closed;
  std::set<AirportId> ground_stops;
};

/// Earliest tick >= `from` at which some pad keeps `separation` from every
/// departure already slotted on it; writes the chosen pad (lowest on ties).
Tick earliest_pad_slot(const std::vector<std::vector<Tick>>& pads, Tick from, Tick separation, int* pad_out);

/// Pure approval rule. Order: unknown airport (LookupError), malformed route
/// (rejected `invalid_route`), NFZ crossing (rejected `nfz`, when enabled),
/// closed airway or ground stop at the origin (deferred), any route airway at
/// reservations >= capacity * fraction (deferred `congestion`), otherwise
/// approved at the earliest pad slot >= max(requested, now).
ApprovalDecision approve_plan(const PlanRequest& req, const AirwayNetwork& net, std::span<const NoFlyZone> zones,
                              const AirspaceLoad& load, const ApprovalPolicy& policy, Tick now);

/// Every segment a plan flies: vertical climb at the origin, connector to the
/// first node, airways, connector and vertical descent at the destination.
std::vector<std::pair<LocalPoint, LocalPoint>> route_segments(const AirwayNetwork& net, AirportId origin,
                                                              AirportId destination,
                                                              const std::vector<NodeId>& route);

struct AirwayStats {
  std::uint64_t transits = 0;
  int occupancy = 0;
  int peak = 0;
};

struct AirportStats {
  std::uint64_t departures = 0;
  std::uint64_t arrivals = 0;
};

struct TrafficStats {
  std::map<AirwayId, AirwayStats> airways;
  std::map<AirportId, AirportStats> airports;
  std::uint64_t completed = 0;
  std::uint64_t aborted = 0;
  std::uint64_t collisions = 0;
};

nlohmann::json stats_to_json(const TrafficStats& s);

struct MonitorEvent {
  enum class Kind { kEnter, kExit, kDeviation };
  Kind kind = Kind::kEnter;
  Tick tick = 0;
  UavId uav = 0;
  AirwayId airway = 0;
  double lateral = 0.0;
};

nlohmann::json monitor_event_to_json(const MonitorEvent& e);

/// Flight monitoring: airway entry/exit from the airway a vehicle reports,
/// deviation when its lateral distance from that airway's centerline exceeds
/// corridor_radius + tolerance (one event per excursion).
class FlightMonitor {
 public:
  FlightMonitor(const AirwayNetwork& net, double tolerance);

  std::vector<MonitorEvent> observe(Tick tick, UavId uav, const LocalPoint& position, AirwayId airway);
  /// Vehicle left the simulation; closes any open airway occupancy.
  std::vector<MonitorEvent> remove(Tick tick, UavId uav);
  void record_transition(const FlightPlan& plan, PlanState to);
  void record_collision() { ++stats_.collisions; }

  const TrafficStats& stats() const { return stats_; }

 private:
  struct Track {
    AirwayId airway = 0;
    bool deviating = false;
  };
  const AirwayNetwork* net_;
  double tolerance_;
  std::map<UavId, Track> tracks_;
  TrafficStats stats_;
};

enum class OrderKind { kCloseAirway, kReopenAirway, kActivateNfz, kDeactivateNfz, kGroundStop, kLiftGroundStop };

struct ControlOrder {
  OrderKind kind = OrderKind::kCloseAirway;
  std::vector<AirwayId> airways;
  std::optional<NoFlyZone> zone;  // activate
  std::uint32_t zone_id = 0;      // deactivate
  AirportId airport = 0;
  std::string source;  // anomaly id or request id, echoed back
};

nlohmann::json order_to_json(const ControlOrder& o);
ControlOrder order_from_json(const nlohmann::json& j);

struct ControlAck {
  ControlOrder order;
  std::vector<PlanId> affected;  // re-plan (airway/NFZ) or held departures (ground stop)
};

/// The built-in control authority: custody of airspace structure, plan
/// approval with pad slotting, airspace orders and traffic statistics.
class ControlAuthority {
 public:
  ControlAuthority(const AirwayNetwork& net, std::vector<NoFlyZone> zones, ApprovalPolicy policy);

  ApprovalDecision submit(const PlanRequest& req, Tick now);
  /// Throws LookupError for unknown airways/airports/zones.
  ControlAck issue_airspace_control(const ControlOrder& order, Tick now);
  void observe_plan_state(const FlightPlan& status, Tick now);
  std::vector<MonitorEvent> observe_telemetry(const nlohmann::json& telemetry);

  AirspaceLoad load() const;
  /// Closed airways plus airways whose centerline crosses an active NFZ.
  std::set<AirwayId> blocked_airways(Tick now) const;
  nlohmann::json airspace_state(Tick now) const;
  const TrafficStats& stats() const { return monitor_.stats(); }
  const std::vector<NoFlyZone>& zones() const { return zones_; }

  /// Bus adapter: subscribe to plan/submit, control/order, plan/state and
  /// uav/telemetry/*.
  void attach(MessageBus& bus);
  /// One authority phase: orders, plan states, telemetry, then submissions in
  /// plan-id order; publishes decisions, airspace/state on change and
  /// stats/traffic every policy.stats_every ticks.
  void step(Tick now);

 private:
  struct Record {
    PlanRequest request;
    FlightPlan status;
    std::vector<AirwayId> airways;  // remaining
    bool approved = false;
    bool departed = false;
    bool held = false;
    int pad = -1;
  };

  std::vector<PlanId> plans_using(const std::set<AirwayId>& airways) const;
  std::vector<PlanId> plans_crossing(const NoFlyZone& zone, Tick now) const;
  void reslot_held(AirportId airport, Tick now, std::vector<ApprovalDecision>& out);
  void release_slot(Record& r);

  const AirwayNetwork* net_;
  std::vector<NoFlyZone> zones_;
  ApprovalPolicy policy_;
  std::set<AirwayId> closed_;
  std::set<AirportId> ground_stops_;
  std::map<AirportId, std::vector<std::vector<Tick>>> pad_slots_;
  std::map<PlanId, Record> plans_;
  FlightMonitor monitor_;

  MessageBus* bus_ = nullptr;
  SubscriptionId sub_submit_ = 0, sub_order_ = 0, sub_state_ = 0, sub_telemetry_ = 0;
  std::vector<PlanId> pending_replan_;
  bool airspace_dirty_ = false;
};

}  // namespace skylane
