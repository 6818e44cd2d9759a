#include "skylane/traffic/traffic.hpp"

#include <algorithm>
#include <cmath>

#include "skylane/airway/routing.hpp"
#include "skylane/authority/authority.hpp"
#include "skylane/errors.hpp"

namespace skylane {
namespace {

constexpr double kHoldGain = 0.5;  // 1/s, approach speed per meter beyond the hold point
constexpr double kGroundZ = 0.0;

Vec3 vec3_of(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
nlohmann::json json_of(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 lane_offset(const LocalPoint& a, const LocalPoint& b, double offset) {
  Vec2 d(b.x() - a.x(), b.y() - a.y());
  if (d.norm() < 1e-9) return Vec3::Zero();
  d.normalize();
  return Vec3(d.y(), -d.x(), 0.0) * offset;
}

const char* mode_name(SetpointMode m) {
  switch (m) {
    case SetpointMode::kPositionHold: return "position_hold";
    case SetpointMode::kVelocity: return "velocity";
    case SetpointMode::kWaypoint: return "waypoint";
  }
  return "waypoint";
}

}  // namespace

nlohmann::json setpoint_to_json(const ControlSetpoint& s) {
  nlohmann::json j = {{"mode", mode_name(s.mode)}, {"target", json_of(s.target)}, {"yaw", s.yaw},
                      {"speed_limit", s.speed_limit}};
  if (s.hold_altitude) j["hold_altitude"] = *s.hold_altitude;
  return j;
}

ControlSetpoint setpoint_from_json(const nlohmann::json& j) {
  ControlSetpoint s;
  const std::string mode = j.value("mode", std::string("waypoint"));
  if (mode == "position_hold") s.mode = SetpointMode::kPositionHold;
  else if (mode == "velocity") s.mode = SetpointMode::kVelocity;
  else if (mode == "waypoint") s.mode = SetpointMode::kWaypoint;
  else throw ValidationError("setpoint: unknown mode '" + mode + "'");
  s.target = vec3_of(j.at("target"));
  s.yaw = j.value("yaw", 0.0);
  s.speed_limit = j.value("speed_limit", 1e9);
  if (j.contains("hold_altitude") && !j["hold_altitude"].is_null()) s.hold_altitude = j["hold_altitude"].get<double>();
  if (!s.target.allFinite() || !std::isfinite(s.yaw) || !(s.speed_limit >= 0.0))
    throw ValidationError("setpoint: non-finite or negative values");
  return s;
}

nlohmann::json command_to_json(const UavCommand& c, Tick now) {
  return {{"uav", c.uav},          {"plan", c.plan},   {"tick", now}, {"setpoint", setpoint_to_json(c.setpoint)},
          {"airway", c.airway},    {"phase", plan_state_name(c.phase)}};
}

UavCommand command_from_json(const nlohmann::json& j) {
  try {
    UavCommand c;
    c.uav = j.at("uav").get<UavId>();
    c.plan = j.value("plan", PlanId{0});
    c.setpoint = setpoint_from_json(j.at("setpoint"));
    c.airway = j.value("airway", AirwayId{0});
    c.phase = plan_state_from(j.value("phase", std::string("enroute")));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("command: ") + e.what());
  }
}

FlightPlan plan_mission(const FlightDemand& demand, const AirwayNetwork& net, const std::set<AirwayId>& closed,
                        PlanId id, UavId uav) {
  if (demand.origin == demand.destination) throw ValidationError("demand: origin equals destination");
  FlightPlan p;
  p.id = id;
  p.demand = demand.id;
  p.uav = uav;
  p.origin = demand.origin;
  p.destination = demand.destination;
  p.requested_departure = demand.requested_departure;
  const auto route = shortest_route(net, demand.origin, demand.destination, closed);
  if (!route) {
    p.state = PlanState::kAborted;
    p.reason = "unreachable";
    return p;
  }
  p.route = route->nodes;
  p.state = PlanState::kDraft;
  return p;
}

std::optional<LocalPoint> connector_gate(const AirwayNetwork& net, AirportId airport, const TrafficParams& params) {
  const Airport& ap = net.airport(airport);
  const LocalPoint& node = net.node(ap.linked_node).position;
  const Vec2 d = ap.ground_position.head<2>() - node.head<2>();
  const double len = d.norm();
  if (len < 1e-6) return std::nullopt;
  const Vec2 xy = node.head<2>() + d / len * std::min(len, params.gate_distance());
  return LocalPoint(xy.x(), xy.y(), node.z());
}

std::vector<Waypoint> build_waypoints(const AirwayNetwork& net, const std::vector<NodeId>& nodes, PathStart start,
                                      std::size_t first, AirportId origin, AirportId destination,
                                      const LocalPoint& departure_pad, const LocalPoint& arrival_pad,
                                      const TrafficParams& params) {
  if (nodes.empty()) throw ValidationError("path: empty route");
  std::vector<Waypoint> out;
  const std::size_t k = nodes.size() - 1;
  const double cruise_z = net.node(nodes.front()).position.z();
  const NodeId last = nodes.back();

  if (start == PathStart::kPad) {
    Waypoint top;
    top.point = LocalPoint(departure_pad.x(), departure_pad.y(), cruise_z);
    top.phase = PlanState::kTakingOff;
    out.push_back(top);
    Waypoint n0;
    n0.point = net.node(nodes.front()).position;
    n0.route_index = 1;
    if (const auto g = connector_gate(net, origin, params)) {
      Waypoint gate;
      gate.point = *g;
      gate.start_node = nodes.front();
      out.push_back(gate);
    } else {
      n0.start_node = nodes.front();
    }
    out.push_back(n0);
    first = 0;
  }
  for (std::size_t i = first; i < k; ++i) {
    const LocalPoint& a = net.node(nodes[i]).position;
    const LocalPoint& b = net.node(nodes[i + 1]).position;
    const auto w = net.airway_between(nodes[i], nodes[i + 1]);
    if (!w) throw LookupError("path: route hop has no airway");
    const Vec3 off = lane_offset(a, b, params.lane_offset);
    const bool hop = !(i == first && start == PathStart::kLaneEnd);
    if (hop) {
      Waypoint h;
      h.point = a + off;
      h.airway = *w;
      h.route_index = i + 1;
      out.push_back(h);
    }
    Waypoint e;
    e.point = b + off;
    e.airway = *w;
    e.approach_node = nodes[i + 1];
    e.route_index = i + 2;
    out.push_back(e);
  }
  const LocalPoint& last_pos = net.node(last).position;
  if (const auto g = connector_gate(net, destination, params)) {
    Waypoint gate;
    gate.point = *g;
    gate.route_index = k + 1;
    out.push_back(gate);
  }
  Waypoint top;
  top.point = LocalPoint(arrival_pad.x(), arrival_pad.y(), last_pos.z());
  top.route_index = k + 1;
  out.push_back(top);
  Waypoint down;
  down.point = arrival_pad - Vec3(0, 0, params.landing_depth);
  down.route_index = k + 1;
  down.phase = PlanState::kLanding;
  out.push_back(down);
  return out;
}

double separation_scale(double gap, double s_min) {
  const double s_stop = 0.5 * s_min;
  return std::clamp((gap - s_stop) / (s_min - s_stop), 0.0, 1.0);
}

std::map<UavId, double> separation_scales(std::span<const SeparationEntry> entries, double s_min,
                                          double lateral_clearance) {
  std::map<UavId, double> scale;
  for (const auto& e : entries) scale[e.uav] = 1.0;

  // Lane ordering.
  std::map<std::pair<AirwayId, int>, std::vector<std::pair<double, const SeparationEntry*>>> lanes;
  for (const auto& e : entries) {
    if (e.airway == 0 || e.lane == 0) continue;
    lanes[{e.airway, e.lane}].push_back({0.0, &e});
  }
  for (auto& [key, members] : lanes) {
    if (members.size() < 2) continue;
    // Progress along the lane's travel direction, measured from any fixed origin.
    Vec3 dir = Vec3::Zero();
    for (auto& [prog, e] : members) dir += e->direction;
    if (dir.norm() < 1e-9) dir = members.front().second->direction;
    if (dir.norm() < 1e-9) continue;
    dir.normalize();
    for (auto& [prog, e] : members) prog = e->position.dot(dir);
    std::sort(members.begin(), members.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second->uav < y.second->uav;
    });
    for (std::size_t i = 1; i < members.size(); ++i) {
      const double gap = (members[i].second->position - members[i - 1].second->position).norm();
      double& s = scale[members[i].second->uav];
      s = std::min(s, separation_scale(gap, s_min));
    }
  }

  // Forward corridor.
  auto ahead = [&](const SeparationEntry& from, const SeparationEntry& to) {
    if (from.direction.norm() < 1e-9) return false;
    const Vec3 rel = to.position - from.position;
    const double along = rel.dot(from.direction);
    if (along <= 0.0 || rel.norm() >= s_min) return false;
    return (rel - along * from.direction).norm() <= lateral_clearance;
  };
  for (const auto& a : entries) {
    for (const auto& b : entries) {
      if (a.uav == b.uav || !ahead(a, b)) continue;
      if (ahead(b, a) && a.uav < b.uav) continue;
      double& s = scale[a.uav];
      s = std::min(s, separation_scale((b.position - a.position).norm(), s_min));
    }
  }
  return scale;
}

void NodeGate::request(NodeId node, UavId uav, Tick tick, double distance, LaneKey in_lane, LaneKey out_lane) {
  if (requested(node, uav) || owns(node, uav)) return;
  queues_[node].insert({tick, distance, uav, in_lane, out_lane});
}

void NodeGate::release(NodeId node, UavId uav) {
  auto it = owners_.find(node);
  if (it != owners_.end() && it->second == uav) owners_.erase(it);
  auto q = queues_.find(node);
  if (q != queues_.end()) std::erase_if(q->second, [&](const Request& r) { return r.uav == uav; });
}

void NodeGate::forget(UavId uav) {
  std::erase_if(owners_, [&](const auto& kv) { return kv.second == uav; });
  for (auto& [node, q] : queues_) std::erase_if(q, [&](const Request& r) { return r.uav == uav; });
}

void NodeGate::grant(const std::function<bool(UavId, LaneKey, LaneKey)>& admissible) {
  for (auto& [node, q] : queues_) {
    if (q.empty() || owners_.count(node)) continue;
    for (auto it = q.begin(); it != q.end(); ++it) {
      if (admissible && !admissible(it->uav, it->in_lane, it->out_lane)) continue;
      owners_[node] = it->uav;
      q.erase(it);
      break;
    }
  }
}

std::optional<UavId> NodeGate::owner(NodeId node) const {
  auto it = owners_.find(node);
  if (it == owners_.end()) return std::nullopt;
  return it->second;
}

bool NodeGate::owns(NodeId node, UavId uav) const {
  auto it = owners_.find(node);
  return it != owners_.end() && it->second == uav;
}

bool NodeGate::requested(NodeId node, UavId uav) const {
  auto q = queues_.find(node);
  if (q == queues_.end()) return false;
  return std::any_of(q->second.begin(), q->second.end(), [&](const Request& r) { return r.uav == uav; });
}

TrafficManager::TrafficManager(const Scenario& s) : net_(&s.network), params_(s.traffic), demands_(s.demands) {
  validate_traffic_params(params_);
  for (const auto& f : s.fleet) {
    home_[f.id] = f.home;
    idle_[f.home].insert(f.id);
  }
  for (const auto& [id, a] : net_->airports) {
    for (const LocalPoint& p : pad_positions(*net_, id, params_.pad_spacing)) pads_[id].push_back({p, PadUse::kFree, 0});
  }
}

void TrafficManager::attach(MessageBus& bus) {
  bus_ = &bus;
  sub_decision_ = bus.subscribe("plan/decision");
  sub_telemetry_ = bus.subscribe("uav/telemetry/*");
  sub_airspace_ = bus.subscribe("airspace/state");
}

bool TrafficManager::all_terminal() const {
  if (plans_.size() < demands_.size()) return false;
  return std::all_of(plans_.begin(), plans_.end(), [](const auto& kv) { return is_terminal(kv.second.state); });
}

void TrafficManager::publish_state(const FlightPlan& p, Tick now, const char* event) {
  nlohmann::json j = plan_status_to_json(p, now);
  if (event) j["event"] = event;
  bus_->publish("plan/state", j, now);
}

void TrafficManager::transition(FlightPlan& p, PlanState to, Tick now, const std::string& reason) {
  if (!legal_transition(p.state, to))
    throw SchedulingError(std::string("illegal plan transition ") + plan_state_name(p.state) + " -> " +
                          plan_state_name(to));
  p.state = to;
  if (!reason.empty()) p.reason = reason;
  publish_state(p, now);
}

std::optional<UavId> TrafficManager::take_idle(AirportId airport) {
  auto& pool = idle_[airport];
  if (pool.empty()) return std::nullopt;
  const UavId id = *pool.begin();
  pool.erase(pool.begin());
  return id;
}

int TrafficManager::free_pad(AirportId airport) const {
  const auto& pads = pads_.at(airport);
  for (std::size_t i = 0; i < pads.size(); ++i)
    if (pads[i].use == PadUse::kFree) return static_cast<int>(i);
  return -1;
}

void TrafficManager::release_all(FlightPlan& p) {
  gate_.forget(p.uav);
  for (auto& [airport, pads] : pads_)
    for (auto& pad : pads)
      if (pad.use != PadUse::kFree && pad.plan == p.id) pad = {pad.position, PadUse::kFree, 0};
}

void TrafficManager::submit(FlightPlan& p, Flight& f, Tick now) {
  PlanRequest req;
  req.plan = p.id;
  req.demand = p.demand;
  req.uav = p.uav;
  req.origin = p.origin;
  req.destination = p.destination;
  req.route = p.route;
  req.requested_departure = p.requested_departure;
  const nlohmann::json j = request_to_json(req);
  bus_->publish("plan/submit", j, now);
  if (p.state == PlanState::kDraft) transition(p, PlanState::kSubmitted, now);
  f.awaiting = true;
  f.submitted_at = now;
}

void TrafficManager::handle_decision(const nlohmann::json& payload, Tick now) {
  const PlanId id = payload.at("plan").get<PlanId>();
  auto it = plans_.find(id);
  if (it == plans_.end()) return;
  FlightPlan& p = it->second;
  Flight& f = flights_.at(id);
  const std::string verdict = payload.at("verdict").get<std::string>();
  if (verdict == "approved") {
    const Tick dep = payload.at("assigned_departure").get<Tick>();
    if (p.state == PlanState::kSubmitted) {
      p.assigned_departure = dep;
      f.departure = dep;
      f.awaiting = false;
      transition(p, PlanState::kApproved, now);
    } else if (p.state == PlanState::kApproved) {
      // Re-slot after a ground stop.
      p.assigned_departure = dep;
      f.departure = dep;
      f.held = false;
    }
  } else if (verdict == "deferred") {
    if (p.state != PlanState::kSubmitted) return;
    f.awaiting = false;
    f.retry_at = std::max(now + 1, payload.value("until", now + 1));
  } else if (verdict == "rejected") {
    if (p.state != PlanState::kSubmitted) return;
    f.awaiting = false;
    transition(p, PlanState::kRejected, now, payload.value("reason", std::string("rejected")));
    idle_[home_.at(p.uav)].insert(p.uav);
  }
}

void TrafficManager::handle_airspace(const nlohmann::json& payload, Tick now) {
  const auto blocked = payload.value("blocked_airways", std::vector<AirwayId>{});
  blocked_ = std::set<AirwayId>(blocked.begin(), blocked.end());
  const auto stops = payload.value("ground_stops", std::vector<AirportId>{});
  ground_stops_ = std::set<AirportId>(stops.begin(), stops.end());
  for (PlanId id : payload.value("held", std::vector<PlanId>{})) {
    auto it = plans_.find(id);
    if (it != plans_.end() && it->second.state == PlanState::kApproved) flights_.at(id).held = true;
  }
  std::set<PlanId> flagged;
  for (PlanId id : payload.value("replan", std::vector<PlanId>{})) flagged.insert(id);
  for (auto& [id, p] : plans_) {
    if (is_terminal(p.state) || p.route.empty()) continue;
    if (!flagged.count(id)) {
      std::vector<AirwayId> ahead;
      try {
        ahead = remaining_airways(*net_, p);
      } catch (const LookupError&) {
      }
      if (std::none_of(ahead.begin(), ahead.end(), [&](AirwayId w) { return blocked_.count(w) > 0; })) continue;
    }
    replan(p, flights_.at(id), now);
  }
}

LocalPoint TrafficManager::current_position(const FlightPlan& p, const Flight& f) const {
  auto it = known_.find(p.uav);
  if (it != known_.end() && it->second.valid) return it->second.position;
  if (p.departure_pad >= 0) return pads_.at(p.origin)[static_cast<std::size_t>(p.departure_pad)].position;
  return f.path.empty() ? LocalPoint::Zero() : f.path.front().point;
}

int TrafficManager::current_leg(const FlightPlan& p, const Flight& f) const {
  if (!is_in_flight(p.state) || f.path.empty()) return -1;
  const Waypoint& w = f.path[f.target];
  if (w.airway == 0) return -1;
  return static_cast<int>(w.route_index) - (w.approach_node == 0 ? 1 : 2);
}

LaneKey TrafficManager::in_lane(const FlightPlan& p, const Flight& f) const {
  const int leg = current_leg(p, f);
  if (leg < 0) return (LaneKey{1} << 63) | p.origin;
  const auto i = static_cast<std::size_t>(leg);
  return lane_key(p.route[i], p.route[i + 1]);
}

LaneKey TrafficManager::out_lane(const FlightPlan& p, NodeId node) const {
  for (std::size_t j = 0; j + 1 < p.route.size(); ++j)
    if (p.route[j] == node) return lane_key(p.route[j], p.route[j + 1]);
  return 0;
}

std::map<LaneKey, std::size_t> TrafficManager::lane_occupancy() const {
  std::map<LaneKey, std::size_t> occ;
  for (const auto& [id, p] : plans_) {
    if (!is_in_flight(p.state)) continue;
    const int leg = current_leg(p, flights_.at(id));
    if (leg >= 0) ++occ[lane_key(p.route[static_cast<std::size_t>(leg)], p.route[static_cast<std::size_t>(leg) + 1])];
    for (std::size_t j = 0; j + 1 < p.route.size(); ++j)
      if (static_cast<int>(j) > leg && gate_.owns(p.route[j], p.uav)) ++occ[lane_key(p.route[j], p.route[j + 1])];
  }
  return occ;
}

std::map<LaneKey, UavId> TrafficManager::lane_fronts() const {
  std::map<LaneKey, std::pair<double, UavId>> best;
  for (const auto& [id, p] : plans_) {
    const Flight& f = flights_.at(id);
    const int leg = current_leg(p, f);
    if (leg < 0) continue;
    const NodeId end = p.route[static_cast<std::size_t>(leg) + 1];
    const double d = (net_->node(end).position - current_position(p, f)).norm();
    const LaneKey key = lane_key(p.route[static_cast<std::size_t>(leg)], end);
    auto it = best.find(key);
    if (it == best.end() || std::make_pair(d, p.uav) < it->second) best[key] = {d, p.uav};
  }
  std::map<LaneKey, UavId> out;
  for (const auto& [key, v] : best) out[key] = v.second;
  return out;
}

std::size_t TrafficManager::lane_capacity(LaneKey lane) const {
  const LocalPoint& a = net_->node(static_cast<NodeId>(lane >> 32)).position;
  const LocalPoint& b = net_->node(static_cast<NodeId>(lane & 0xffffffffu)).position;
  const double usable = (b - a).norm() - params_.hold_distance() - params_.node_radius;
  return static_cast<std::size_t>(std::max(1.0, std::floor(usable / params_.s_min)));
}

void TrafficManager::begin_emergency(FlightPlan& p, Flight& f, const LocalPoint& pos, Tick now) {
  f.emergency = true;
  for (auto& pad : pads_.at(p.destination))
    if (pad.use == PadUse::kArrival && pad.plan == p.id) pad = {pad.position, PadUse::kFree, 0};
  p.arrival_pad = -1;
  Waypoint down;
  down.point = LocalPoint(pos.x(), pos.y(), kGroundZ - params_.landing_depth);
  down.phase = PlanState::kLanding;
  f.path = {down};
  f.target = 0;
  if (p.state == PlanState::kTakingOff) transition(p, PlanState::kEnroute, now, "emergency");
  transition(p, PlanState::kLanding, now, "emergency");
}

void TrafficManager::replan(FlightPlan& p, Flight& f, Tick now) {
  if (f.emergency) return;
  if (p.state == PlanState::kLanding || is_terminal(p.state)) return;
  auto abort = [&] {
    release_all(p);
    const bool flying = is_in_flight(p.state);
    transition(p, PlanState::kAborted, now, "unreachable");
    if (!flying) idle_[home_.at(p.uav)].insert(p.uav);
  };

  if (!is_in_flight(p.state)) {
    const auto route = shortest_route(*net_, p.origin, p.destination, blocked_);
    if (!route) return abort();
    if (route->nodes == p.route) return;
    p.route = route->nodes;
    if (p.state == PlanState::kSubmitted) {
      submit(p, f, now);
    } else {
      publish_state(p, now, "replan");
    }
    return;
  }

  const LocalPoint arrival =
      p.arrival_pad >= 0 ? pads_.at(p.destination)[static_cast<std::size_t>(p.arrival_pad)].position
                         : pads_.at(p.destination).front().position;
  const LocalPoint departure = pads_.at(p.origin)[static_cast<std::size_t>(std::max(0, p.departure_pad))].position;
  const Waypoint& tgt = f.path[f.target];
  const std::size_t k = p.route.size() - 1;
  if (tgt.route_index > k) return;  // on the final connector

  if (tgt.route_index <= 1 && tgt.airway == 0) {
    // Still at or before the first node: re-plan the whole route.
    const auto route = shortest_route(*net_, p.origin, p.destination, blocked_);
    if (!route) return abort();
    p.route = route->nodes;
    f.path = build_waypoints(*net_, p.route, PathStart::kPad, 0, p.origin, p.destination, departure, arrival, params_);
    publish_state(p, now, "replan");
    return;
  }

  // Hop waypoints have route_index i + 1 and open leg i at node i; lane ends
  // have route_index i + 2 and finish leg i at node i + 1.
  const bool at_hop = tgt.approach_node == 0;
  const std::size_t from_idx = tgt.route_index - 1;
  const NodeId from_node = p.route[from_idx];
  const auto tail = shortest_node_route(*net_, from_node, p.route.back(), blocked_);
  if (!tail) return abort();
  std::vector<NodeId> route(p.route.begin(), p.route.begin() + static_cast<std::ptrdiff_t>(from_idx));
  route.insert(route.end(), tail->nodes.begin(), tail->nodes.end());
  if (route == p.route) return;
  p.route = route;
  std::vector<Waypoint> rest;
  if (at_hop) {
    rest = build_waypoints(*net_, p.route, PathStart::kNodeHop, from_idx, p.origin, p.destination, departure, arrival, params_);
  } else {
    // Finish the current lane into from_node, then continue on the new legs.
    const auto fresh = build_waypoints(*net_, p.route, PathStart::kNodeHop, from_idx, p.origin, p.destination, departure, arrival, params_);
    rest.push_back(tgt);
    rest.insert(rest.end(), fresh.begin(), fresh.end());
  }
  f.path.resize(f.target);
  f.path.insert(f.path.end(), rest.begin(), rest.end());
  publish_state(p, now, "replan");
}

void TrafficManager::try_depart(FlightPlan& p, Flight& f, Tick now) {
  if (now < f.departure || f.held || ground_stops_.count(p.origin)) return;
  const int pad = free_pad(p.origin);
  if (pad < 0) return;
  auto& pads = pads_.at(p.origin);
  pads[static_cast<std::size_t>(pad)] = {pads[static_cast<std::size_t>(pad)].position, PadUse::kDeparture, p.id};
  p.departure_pad = pad;
  const LocalPoint dep = pads[static_cast<std::size_t>(pad)].position;
  f.path = build_waypoints(*net_, p.route, PathStart::kPad, 0, p.origin, p.destination, dep,
                           pads_.at(p.destination).front().position, params_);
  f.target = 0;
  known_[p.uav] = Known{dep, Vec3::Zero(), now, true};
  transition(p, PlanState::kTakingOff, now);
}

void TrafficManager::fly(Tick now) {
  std::vector<SeparationEntry> entries;
  for (auto& [id, p] : plans_) {
    if (!is_in_flight(p.state)) continue;
    const Flight& f = flights_.at(id);
    const LocalPoint pos = current_position(p, f);
    const Waypoint& w = f.path[f.target];
    SeparationEntry e;
    e.uav = p.uav;
    e.position = pos;
    const Vec3 d = w.point - pos;
    if (d.norm() > 0.5) e.direction = d.normalized();
    e.airway = w.airway;
    if (w.airway != 0) {
      // Lanes sit right of travel, so the side of the centerline gives the direction.
      const Airway& a = net_->airway(w.airway);
      const LocalPoint& pa = net_->node(a.a).position;
      Vec3 ab = net_->node(a.b).position - pa;
      ab.z() = 0.0;
      const Vec3 right(ab.y(), -ab.x(), 0.0);
      e.lane = (w.point - pa).dot(right) >= 0.0 ? 1 : -1;
      if (ab.norm() > 1e-9) e.direction = ab.normalized() * e.lane;
    }
    entries.push_back(e);
  }
  // Followers stop separation_buffer beyond s_stop.
  const auto scales =
      separation_scales(entries, params_.s_min + 2.0 * params_.separation_buffer, params_.lateral_clearance);
  const double release_distance = params_.node_radius;

  for (auto& [id, p] : plans_) {
    if (!is_in_flight(p.state)) continue;
    Flight& f = flights_.at(id);
    const LocalPoint pos = current_position(p, f);
    const Known& kn = known_[p.uav];
    const std::size_t k = p.route.size() - 1;

    // Departure pad frees once the vehicle has left its column.
    if (p.departure_pad >= 0) {
      auto& pad = pads_.at(p.origin)[static_cast<std::size_t>(p.departure_pad)];
      if (pad.use == PadUse::kDeparture && pad.plan == p.id) {
        const Vec2 dxy(pos.x() - pad.position.x(), pos.y() - pad.position.y());
        if (dxy.norm() > 0.5 * params_.pad_spacing) pad = {pad.position, PadUse::kFree, 0};
      }
    }

    if (!f.emergency && kn.valid && kn.health < 1.0 && p.state != PlanState::kLanding) begin_emergency(p, f, pos, now);
    if (f.emergency) {
      const double cruise_z = net_->node(p.route.front()).position.z();
      if (pos.z() < cruise_z - params_.s_min) gate_.forget(p.uav);
      if (kn.valid && kn.tick > 0 && pos.z() - kGroundZ <= params_.touchdown_altitude &&
          kn.velocity.norm() <= params_.touchdown_speed) {
        release_all(p);
        transition(p, PlanState::kAborted, now, "emergency landing");
        known_.erase(p.uav);
        continue;
      }
      UavCommand cmd;
      cmd.uav = p.uav;
      cmd.plan = p.id;
      cmd.setpoint.mode = SetpointMode::kWaypoint;
      cmd.setpoint.target = f.path.front().point;
      cmd.setpoint.speed_limit = params_.descent_speed;
      cmd.phase = p.state;
      bus_->publish("uav/cmd/" + std::to_string(p.uav), command_to_json(cmd, now), now);
      continue;
    }

    // Advance through reached waypoints while gates allow.
    while (f.target + 1 < f.path.size()) {
      const Waypoint& cur = f.path[f.target];
      const double miss = (cur.point - pos).norm();
      const bool settled = kn.valid && miss <= params_.settle_radius && kn.velocity.norm() <= params_.settle_speed;
      if (miss > params_.acceptance_radius && !settled) break;
      const Waypoint& next = f.path[f.target + 1];
      if (next.start_node != 0 && !gate_.owns(next.start_node, p.uav)) {
        const bool arrival_gate = next.start_node == p.route.back() && k == 0;
        if (arrival_gate && p.arrival_pad < 0) {
          const int pad = free_pad(p.destination);
          if (pad < 0) break;
          p.arrival_pad = pad;
          auto& pd = pads_.at(p.destination)[static_cast<std::size_t>(pad)];
          pd = {pd.position, PadUse::kArrival, p.id};
          f.path[f.path.size() - 2].point = LocalPoint(pd.position.x(), pd.position.y(), f.path[f.path.size() - 2].point.z());
          f.path.back().point = pd.position - Vec3(0, 0, params_.landing_depth);
        }
        gate_.request(next.start_node, p.uav, now, (net_->node(next.start_node).position - pos).norm(), in_lane(p, f),
                      out_lane(p, next.start_node));
        break;
      }
      if (cur.phase == PlanState::kTakingOff && p.state == PlanState::kTakingOff) transition(p, PlanState::kEnroute, now);
      ++f.target;
      if (f.path[f.target].phase == PlanState::kLanding && p.state == PlanState::kEnroute) {
        gate_.release(p.route.back(), p.uav);
        transition(p, PlanState::kLanding, now);
      }
      if (cur.route_index > p.progress) {
        p.progress = cur.route_index;
        publish_state(p, now, "progress");
      }
    }
    const Waypoint& tgt = f.path[f.target];

    // Releases: every owned node already passed and left behind.
    for (std::size_t i = 0; i < k; ++i) {
      const NodeId n = p.route[i];
      if (!gate_.owns(n, p.uav)) continue;
      if (tgt.route_index >= i + 2 && (net_->node(n).position - pos).norm() > release_distance) gate_.release(n, p.uav);
    }

    double limit = params_.cruise_speed;
    if (p.state == PlanState::kTakingOff) limit = params_.climb_speed;
    if (p.state == PlanState::kLanding) limit = params_.descent_speed;
    auto sc = scales.find(p.uav);
    if (sc != scales.end() && p.state == PlanState::kEnroute) limit *= sc->second;

    // Approach gating.
    if (tgt.approach_node != 0 && !gate_.owns(tgt.approach_node, p.uav)) {
      const LocalPoint& node = net_->node(tgt.approach_node).position;
      const double dist = (node - pos).norm();
      if (dist <= params_.request_distance && !gate_.requested(tgt.approach_node, p.uav)) {
        bool may_request = true;
        if (tgt.approach_node == p.route.back()) {
          if (p.arrival_pad < 0) {
            const int pad = free_pad(p.destination);
            if (pad < 0) {
              may_request = false;
            } else {
              p.arrival_pad = pad;
              auto& pd = pads_.at(p.destination)[static_cast<std::size_t>(pad)];
              pd = {pd.position, PadUse::kArrival, p.id};
              const std::size_t n = f.path.size();
              f.path[n - 2].point = LocalPoint(pd.position.x(), pd.position.y(), f.path[n - 2].point.z());
              f.path[n - 1].point = pd.position - Vec3(0, 0, params_.landing_depth);
            }
          }
        }
        if (may_request)
          gate_.request(tgt.approach_node, p.uav, now, dist, in_lane(p, f), out_lane(p, tgt.approach_node));
      }
      limit = std::min(limit, kHoldGain * std::max(0.0, dist - params_.hold_distance()));
    }

    // Touchdown.
    if (p.state == PlanState::kLanding && p.arrival_pad >= 0) {
      const LocalPoint& pad = pads_.at(p.destination)[static_cast<std::size_t>(p.arrival_pad)].position;
      if (kn.valid && kn.tick > 0 && pos.z() - pad.z() <= params_.touchdown_altitude &&
          kn.velocity.norm() <= params_.touchdown_speed) {
        release_all(p);
        transition(p, PlanState::kCompleted, now);
        idle_[home_.at(p.uav)].insert(p.uav);
        known_.erase(p.uav);
        continue;
      }
    }

    UavCommand cmd;
    cmd.uav = p.uav;
    cmd.plan = p.id;
    cmd.setpoint.mode = SetpointMode::kWaypoint;
    cmd.setpoint.target = tgt.point;
    cmd.setpoint.speed_limit = limit;
    cmd.airway = tgt.airway;
    cmd.phase = p.state;
    bus_->publish("uav/cmd/" + std::to_string(p.uav), command_to_json(cmd, now), now);
  }
}

void TrafficManager::step(Tick now) {
  if (!bus_) throw SchedulingError("traffic: step() before attach()");
  if (!started_) {
    started_ = true;
    for (const auto& d : demands_) {
      FlightPlan p = plan_mission(d, *net_, blocked_, d.id, 0);
      plans_[p.id] = p;
      flights_[p.id] = Flight{};
      if (p.state == PlanState::kAborted) publish_state(plans_[p.id], now);
    }
  }

  for (const Envelope& e : bus_->drain(sub_telemetry_)) {
    try {
      const UavId uav = e.payload.at("uav").get<UavId>();
      Known& k = known_[uav];
      const Tick t = e.payload.at("tick").get<Tick>();
      if (k.valid && t < k.tick) continue;
      k = {vec3_of(e.payload.at("position")), vec3_of(e.payload.at("velocity")), t, true, 1.0};
      if (auto h = e.payload.find("health"); h != e.payload.end() && h->is_array())
        for (const auto& v : *h) k.health = std::min(k.health, v.get<double>());
    } catch (const std::exception&) {
    }
  }
  for (const Envelope& e : bus_->drain(sub_airspace_)) {
    try {
      handle_airspace(e.payload, now);
    } catch (const std::exception&) {
    }
  }
  for (const Envelope& e : bus_->drain(sub_decision_)) {
    try {
      handle_decision(e.payload, now);
    } catch (const std::exception&) {
    }
  }

  for (auto& [id, p] : plans_) {
    Flight& f = flights_.at(id);
    switch (p.state) {
      case PlanState::kDraft: {
        auto uav = take_idle(p.origin);
        if (!uav) break;
        p.uav = *uav;
        const auto route = shortest_route(*net_, p.origin, p.destination, blocked_);
        if (!route) {
          idle_[p.origin].insert(*uav);
          transition(p, PlanState::kAborted, now, "unreachable");
          break;
        }
        p.route = route->nodes;
        submit(p, f, now);
        break;
      }
      case PlanState::kSubmitted:
        if (f.awaiting && now - f.submitted_at >= params_.resubmit_after) submit(p, f, now);
        if (!f.awaiting && now >= f.retry_at) {
          const auto route = shortest_route(*net_, p.origin, p.destination, blocked_);
          if (!route) {
            idle_[home_.at(p.uav)].insert(p.uav);
            transition(p, PlanState::kAborted, now, "unreachable");
            break;
          }
          p.route = route->nodes;
          submit(p, f, now);
        }
        break;
      case PlanState::kApproved:
        try_depart(p, f, now);
        break;
      default:
        break;
    }
  }

  const auto occupancy = lane_occupancy();
  const auto fronts = lane_fronts();
  gate_.grant([&](UavId uav, LaneKey in, LaneKey out) {
    auto f = fronts.find(in);
    if (f != fronts.end() && f->second != uav) return false;
    if (out == 0) return true;
    auto it = occupancy.find(out);
    return (it == occupancy.end() ? 0 : it->second) < lane_capacity(out);
  });
  fly(now);
  if (now % 30 == 0) {
    for (const auto& [id, p] : plans_)
      if (is_in_flight(p.state)) publish_state(p, now, "heartbeat");
  }
}

}  // namespace skylane
