#include "skylane/traffic/plan.hpp"

#include <array>

#include "skylane/airway/routing.hpp"
#include "skylane/errors.hpp"

namespace skylane {
namespace {

constexpr std::array<std::pair<PlanState, const char*>, 9> kNames = {{
    {PlanState::kDraft, "draft"},
    {PlanState::kSubmitted, "submitted"},
    {PlanState::kApproved, "approved"},
    {PlanState::kRejected, "rejected"},
    {PlanState::kTakingOff, "taking-off"},
    {PlanState::kEnroute, "enroute"},
    {PlanState::kLanding, "landing"},
    {PlanState::kCompleted, "completed"},
    {PlanState::kAborted, "aborted"},
}};

}  // namespace

const char* plan_state_name(PlanState s) {
  for (const auto& [state, name] : kNames)
    if (state == s) return name;
  return "unknown";
}

PlanState plan_state_from(const std::string& name) {
  for (const auto& [state, n] : kNames)
    if (name == n) return state;
  throw ValidationError("unknown plan state '" + name + "'");
}

bool is_terminal(PlanState s) {
  return s == PlanState::kCompleted || s == PlanState::kAborted || s == PlanState::kRejected;
}

bool is_in_flight(PlanState s) {
  return s == PlanState::kTakingOff || s == PlanState::kEnroute || s == PlanState::kLanding;
}

bool legal_transition(PlanState from, PlanState to) {
  if (is_terminal(from)) return false;
  if (to == PlanState::kAborted) return true;
  switch (from) {
    case PlanState::kDraft: return to == PlanState::kSubmitted;
    case PlanState::kSubmitted: return to == PlanState::kApproved || to == PlanState::kRejected;
    case PlanState::kApproved: return to == PlanState::kTakingOff;
    case PlanState::kTakingOff: return to == PlanState::kEnroute;
    case PlanState::kEnroute: return to == PlanState::kLanding;
    case PlanState::kLanding: return to == PlanState::kCompleted;
    default: return false;
  }
}

nlohmann::json plan_status_to_json(const FlightPlan& p, Tick now) {
  nlohmann::json j = {{"plan", p.id},
                      {"demand", p.demand},
                      {"uav", p.uav},
                      {"origin", p.origin},
                      {"destination", p.destination},
                      {"state", plan_state_name(p.state)},
                      {"route", p.route},
                      {"progress", p.progress},
                      {"requested_departure", p.requested_departure},
                      {"assigned_departure", p.assigned_departure},
                      {"departure_pad", p.departure_pad},
                      {"arrival_pad", p.arrival_pad},
                      {"tick", now}};
  if (!p.reason.empty()) j["reason"] = p.reason;
  return j;
}

FlightPlan plan_status_from_json(const nlohmann::json& j) {
  try {
    FlightPlan p;
    p.id = j.at("plan").get<PlanId>();
    p.demand = j.value("demand", DemandId{0});
    p.uav = j.value("uav", UavId{0});
    p.origin = j.value("origin", AirportId{0});
    p.destination = j.value("destination", AirportId{0});
    p.state = plan_state_from(j.at("state").get<std::string>());
    p.route = j.value("route", std::vector<NodeId>{});
    p.progress = j.value("progress", std::size_t{0});
    p.requested_departure = j.value("requested_departure", Tick{0});
    p.assigned_departure = j.value("assigned_departure", Tick{0});
    p.departure_pad = j.value("departure_pad", -1);
    p.arrival_pad = j.value("arrival_pad", -1);
    p.reason = j.value("reason", std::string());
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("plan status: ") + e.what());
  }
}

std::vector<AirwayId> remaining_airways(const AirwayNetwork& net, const FlightPlan& p) {
  if (p.route.size() < 2) return {};
  const std::size_t first = p.progress == 0 ? 0 : p.progress - 1;
  if (first + 1 >= p.route.size()) return {};
  const std::vector<NodeId> rest(p.route.begin() + static_cast<std::ptrdiff_t>(first), p.route.end());
  return route_airways(net, rest);
}

}  // namespace skylane
