#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylane/world/scenario.hpp"
#include "skylane/world/types.hpp"

namespace skylane {

enum class PlanState {
  kDraft,
  kSubmitted,
  kApproved,
  kRejected,
  kTakingOff,
  kEnroute,
  kLanding,
  kCompleted,
  kAborted,
};

const char* plan_state_name(PlanState s);
PlanState plan_state_from(const std::string& name);
bool is_terminal(PlanState s);
/// Vehicle is out of the pool: taking-off, enroute or landing.
bool is_in_flight(PlanState s);
/// draft->submitted->{approved, rejected}->taking-off->enroute->landing->
/// completed, plus any non-terminal state -> aborted.
bool legal_transition(PlanState from, PlanState to);

struct FlightPlan {
  PlanId id = 0;
  DemandId demand = 0;
  UavId uav = 0;
  AirportId origin = 0;
  AirportId destination = 0;
  std::vector<NodeId> route;
  PlanState state = PlanState::kDraft;
  std::string reason;  // abort/reject reason
  std::size_t progress = 0;  // route nodes already passed
  Tick requested_departure = 0;
  Tick assigned_departure = 0;
  int departure_pad = -1;
  int arrival_pad = -1;
};

/// plan/state payload; `pad` is the pad in use for the current phase.
nlohmann::json plan_status_to_json(const FlightPlan& p, Tick now);
FlightPlan plan_status_from_json(const nlohmann::json& j);

/// Airways still ahead of a plan: those after the last passed node.
std::vector<AirwayId> remaining_airways(const AirwayNetwork& net, const FlightPlan& p);

}  // namespace skylane
