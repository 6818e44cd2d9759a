#include "skylane/authority/authority.hpp"

#include <algorithm>
#include <cmath>

#include "skylane/airway/routing.hpp"
#include "skylane/errors.hpp"

namespace skylane {
namespace {

Tick abs_diff(Tick a, Tick b) { return a > b ? a - b : b - a; }

Vec3 vec3_of(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

const std::pair<OrderKind, const char*> kOrderNames[] = {
    {OrderKind::kCloseAirway, "close_airway"},     {OrderKind::kReopenAirway, "reopen_airway"},
    {OrderKind::kActivateNfz, "activate_nfz"},     {OrderKind::kDeactivateNfz, "deactivate_nfz"},
    {OrderKind::kGroundStop, "ground_stop"},       {OrderKind::kLiftGroundStop, "lift_ground_stop"},
};

bool route_connected(const AirwayNetwork& net, const PlanRequest& req) {
  if (req.route.empty()) return false;
  if (req.route.front() != net.airport(req.origin).linked_node) return false;
  if (req.route.back() != net.airport(req.destination).linked_node) return false;
  for (std::size_t i = 0; i + 1 < req.route.size(); ++i) {
    const auto w = net.airway_between(req.route[i], req.route[i + 1]);
    if (!w || !net.airway(*w).permits(req.route[i], req.route[i + 1])) return false;
  }
  return true;
}

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kApproved: return "approved";
    case Verdict::kRejected: return "rejected";
    case Verdict::kDeferred: return "deferred";
  }
  return "unknown";
}

nlohmann::json decision_to_json(const ApprovalDecision& d) {
  nlohmann::json j = {{"plan", d.plan}, {"verdict", verdict_name(d.verdict)}};
  if (d.verdict == Verdict::kApproved) j["assigned_departure"] = d.assigned_departure;
  if (d.verdict != Verdict::kApproved) j["reason"] = d.reason;
  if (d.verdict == Verdict::kDeferred) j["until"] = d.until;
  return j;
}

ApprovalDecision decision_from_json(const nlohmann::json& j) {
  try {
    ApprovalDecision d;
    d.plan = j.at("plan").get<PlanId>();
    const std::string v = j.at("verdict").get<std::string>();
    if (v == "approved") {
      d.verdict = Verdict::kApproved;
      d.assigned_departure = j.at("assigned_departure").get<Tick>();
    } else if (v == "rejected") {
      d.verdict = Verdict::kRejected;
    } else if (v == "deferred") {
      d.verdict = Verdict::kDeferred;
      d.until = j.value("until", Tick{0});
    } else {
      throw ValidationError("decision: unknown verdict '" + v + "'");
    }
    d.reason = j.value("reason", std::string());
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("decision: ") + e.what());
  }
}

nlohmann::json request_to_json(const PlanRequest& r) {
  return {{"plan", r.plan},     {"demand", r.demand}, {"uav", r.uav},
          {"origin", r.origin}, {"destination", r.destination}, {"route", r.route},
          {"requested_departure", r.requested_departure}};
}

PlanRequest request_from_json(const nlohmann::json& j) {
  try {
    PlanRequest r;
    r.plan = j.at("plan").get<PlanId>();
    r.demand = j.value("demand", DemandId{0});
    r.uav = j.value("uav", UavId{0});
    r.origin = j.at("origin").get<AirportId>();
    r.destination = j.at("destination").get<AirportId>();
    r.route = j.at("route").get<std::vector<NodeId>>();
    r.requested_departure = j.value("requested_departure", Tick{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("plan request: ") + e.what());
  }
}

std::vector<std::pair<LocalPoint, LocalPoint>> route_segments(const AirwayNetwork& net, AirportId origin,
                                                              AirportId destination,
                                                              const std::vector<NodeId>& route) {
  std::vector<std::pair<LocalPoint, LocalPoint>> segs;
  if (route.empty()) return segs;
  const Airport& from = net.airport(origin);
  const Airport& to = net.airport(destination);
  const LocalPoint first = net.node(route.front()).position;
  const LocalPoint last = net.node(route.back()).position;
  const LocalPoint climb_top(from.ground_position.x(), from.ground_position.y(), first.z());
  const LocalPoint descent_top(to.ground_position.x(), to.ground_position.y(), last.z());
  segs.emplace_back(from.ground_position, climb_top);
  segs.emplace_back(climb_top, first);
  for (std::size_t i = 0; i + 1 < route.size(); ++i)
    segs.emplace_back(net.node(route[i]).position, net.node(route[i + 1]).position);
  segs.emplace_back(last, descent_top);
  segs.emplace_back(descent_top, to.ground_position);
  return segs;
}

Tick earliest_pad_slot(const std::vector<std::vector<Tick>>& pads, Tick from, Tick separation, int* pad_out) {
  Tick best = ~Tick{0};
  int best_pad = -1;
  for (std::size_t p = 0; p < pads.size(); ++p) {
    std::vector<Tick> candidates{from};
    for (Tick s : pads[p])
      if (s + separation >= from) candidates.push_back(s + separation);
    std::sort(candidates.begin(), candidates.end());
    for (Tick t : candidates) {
      const bool clear = std::all_of(pads[p].begin(), pads[p].end(),
                                     [&](Tick s) { return abs_diff(t, s) >= separation; });
      if (clear) {
        if (t < best) {
          best = t;
          best_pad = static_cast<int>(p);
        }
        break;
      }
    }
  }
  if (pad_out) *pad_out = best_pad;
  return best;
}

ApprovalDecision approve_plan(const PlanRequest& req, const AirwayNetwork& net, std::span<const NoFlyZone> zones,
                              const AirspaceLoad& load, const ApprovalPolicy& policy, Tick now) {
  net.airport(req.origin);
  net.airport(req.destination);
  ApprovalDecision d;
  d.plan = req.plan;

  if (!route_connected(net, req)) {
    d.verdict = Verdict::kRejected;
    d.reason = "invalid_route";
    return d;
  }
  if (policy.nfz_check) {
    for (const auto& [a, b] : route_segments(net, req.origin, req.destination, req.route)) {
      for (const NoFlyZone& z : zones) {
        if (segment_intersects_nfz(a, b, z, now)) {
          d.verdict = Verdict::kRejected;
          d.reason = "nfz";
          return d;
        }
      }
    }
  }
  const std::vector<AirwayId> airways = route_airways(net, req.route);
  for (AirwayId w : airways) {
    if (load.closed.count(w)) {
      d.verdict = Verdict::kDeferred;
      d.reason = "airway_closed";
      d.until = now + 1;
      return d;
    }
  }
  if (load.ground_stops.count(req.origin)) {
    d.verdict = Verdict::kDeferred;
    d.reason = "ground_stop";
    d.until = now + policy.defer_retry;
    return d;
  }
  for (AirwayId w : airways) {
    auto it = load.reservations.find(w);
    const int reserved = it == load.reservations.end() ? 0 : it->second;
    if (reserved >= net.airway(w).capacity * policy.max_airway_occupancy_fraction) {
      d.verdict = Verdict::kDeferred;
      d.reason = "congestion";
      d.until = now + policy.defer_retry;
      return d;
    }
  }
  const Tick from = std::max(req.requested_departure, now);
  auto pads_it = load.pad_slots.find(req.origin);
  Tick slot = from;
  if (pads_it != load.pad_slots.end() && !pads_it->second.empty()) {
    slot = earliest_pad_slot(pads_it->second, from, policy.departure_separation, nullptr);
  }
  d.verdict = Verdict::kApproved;
  d.assigned_departure = slot;
  return d;
}

nlohmann::json stats_to_json(const TrafficStats& s) {
  nlohmann::json airways = nlohmann::json::object(), airports = nlohmann::json::object();
  for (const auto& [id, a] : s.airways)
    airways[std::to_string(id)] = {{"transits", a.transits}, {"occupancy", a.occupancy}, {"peak", a.peak}};
  for (const auto& [id, a] : s.airports)
    airports[std::to_string(id)] = {{"departures", a.departures}, {"arrivals", a.arrivals}};
  return {{"airways", airways},
          {"airports", airports},
          {"completed", s.completed},
          {"aborted", s.aborted},
          {"collisions", s.collisions}};
}

nlohmann::json monitor_event_to_json(const MonitorEvent& e) {
  const char* kind = e.kind == MonitorEvent::Kind::kEnter  ? "airway_enter"
                     : e.kind == MonitorEvent::Kind::kExit ? "airway_exit"
                                                           : "deviation";
  nlohmann::json j = {{"type", kind}, {"tick", e.tick}, {"uav", e.uav}, {"airway", e.airway}};
  if (e.kind == MonitorEvent::Kind::kDeviation) j["lateral"] = e.lateral;
  return j;
}

FlightMonitor::FlightMonitor(const AirwayNetwork& net, double tolerance) : net_(&net), tolerance_(tolerance) {
  for (const auto& [id, w] : net.airways) stats_.airways[id];
  for (const auto& [id, a] : net.airports) stats_.airports[id];
}

std::vector<MonitorEvent> FlightMonitor::observe(Tick tick, UavId uav, const LocalPoint& position,
                                                 AirwayId airway) {
  std::vector<MonitorEvent> out;
  Track& t = tracks_[uav];
  if (airway != t.airway) {
    if (t.airway != 0) {
      --stats_.airways[t.airway].occupancy;
      out.push_back({MonitorEvent::Kind::kExit, tick, uav, t.airway, 0.0});
    }
    t.airway = 0;
    t.deviating = false;
    if (airway != 0 && net_->airways.count(airway)) {
      t.airway = airway;
      auto& s = stats_.airways[airway];
      ++s.transits;
      s.peak = std::max(s.peak, ++s.occupancy);
      out.push_back({MonitorEvent::Kind::kEnter, tick, uav, airway, 0.0});
    }
  }
  if (t.airway != 0) {
    const Airway& w = net_->airway(t.airway);
    const double lateral =
        point_segment_distance(position, net_->node(w.a).position, net_->node(w.b).position);
    const bool outside = lateral > w.corridor_radius + tolerance_;
    if (outside && !t.deviating) out.push_back({MonitorEvent::Kind::kDeviation, tick, uav, t.airway, lateral});
    t.deviating = outside;
  }
  return out;
}

std::vector<MonitorEvent> FlightMonitor::remove(Tick tick, UavId uav) {
  std::vector<MonitorEvent> out;
  auto it = tracks_.find(uav);
  if (it == tracks_.end()) return out;
  if (it->second.airway != 0) {
    --stats_.airways[it->second.airway].occupancy;
    out.push_back({MonitorEvent::Kind::kExit, tick, uav, it->second.airway, 0.0});
  }
  tracks_.erase(it);
  return out;
}

void FlightMonitor::record_transition(const FlightPlan& plan, PlanState to) {
  switch (to) {
    case PlanState::kTakingOff: ++stats_.airports[plan.origin].departures; break;
    case PlanState::kCompleted:
      ++stats_.airports[plan.destination].arrivals;
      ++stats_.completed;
      break;
    case PlanState::kAborted:
    case PlanState::kRejected: ++stats_.aborted; break;
    default: break;
  }
}

nlohmann::json order_to_json(const ControlOrder& o) {
  nlohmann::json j;
  for (const auto& [k, name] : kOrderNames)
    if (k == o.kind) j["order"] = name;
  switch (o.kind) {
    case OrderKind::kCloseAirway:
    case OrderKind::kReopenAirway: j["airways"] = o.airways; break;
    case OrderKind::kActivateNfz: j["zone"] = zone_to_json(*o.zone); break;
    case OrderKind::kDeactivateNfz: j["zone_id"] = o.zone_id; break;
    case OrderKind::kGroundStop:
    case OrderKind::kLiftGroundStop: j["airport"] = o.airport; break;
  }
  if (!o.source.empty()) j["source"] = o.source;
  return j;
}

ControlOrder order_from_json(const nlohmann::json& j) {
  try {
    ControlOrder o;
    const std::string name = j.at("order").get<std::string>();
    bool found = false;
    for (const auto& [k, n] : kOrderNames) {
      if (name == n) {
        o.kind = k;
        found = true;
      }
    }
    if (!found) throw ValidationError("order: unknown kind '" + name + "'");
    switch (o.kind) {
      case OrderKind::kCloseAirway:
      case OrderKind::kReopenAirway:
        o.airways = j.contains("airways") ? j["airways"].get<std::vector<AirwayId>>()
                                          : std::vector<AirwayId>{j.at("airway").get<AirwayId>()};
        break;
      case OrderKind::kActivateNfz: o.zone = zone_from_json(j.at("zone")); break;
      case OrderKind::kDeactivateNfz: o.zone_id = j.at("zone_id").get<std::uint32_t>(); break;
      case OrderKind::kGroundStop:
      case OrderKind::kLiftGroundStop: o.airport = j.at("airport").get<AirportId>(); break;
    }
    o.source = j.value("source", std::string());
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("order: ") + e.what());
  }
}

ControlAuthority::ControlAuthority(const AirwayNetwork& net, std::vector<NoFlyZone> zones, ApprovalPolicy policy)
    : net_(&net), zones_(std::move(zones)), policy_(policy), monitor_(net, policy.corridor_tolerance) {
  validate_policy(policy_);
  for (const auto& [id, a] : net.airports) pad_slots_[id].assign(static_cast<std::size_t>(std::max(1, a.pads)), {});
}

AirspaceLoad ControlAuthority::load() const {
  AirspaceLoad l;
  for (const auto& [id, r] : plans_) {
    if (!r.approved || is_terminal(r.status.state)) continue;
    for (AirwayId w : r.airways) ++l.reservations[w];
  }
  l.pad_slots = pad_slots_;
  l.closed = closed_;
  l.ground_stops = ground_stops_;
  return l;
}

ApprovalDecision ControlAuthority::submit(const PlanRequest& req, Tick now) {
  const ApprovalDecision d = approve_plan(req, *net_, zones_, load(), policy_, now);
  Record& r = plans_[req.plan];
  if (r.approved && !is_terminal(r.status.state)) {
    // A duplicate submission of an approved plan returns the standing approval.
    ApprovalDecision again;
    again.plan = req.plan;
    again.verdict = Verdict::kApproved;
    again.assigned_departure = r.status.assigned_departure;
    return again;
  }
  r.request = req;
  r.status.id = req.plan;
  r.status.demand = req.demand;
  r.status.uav = req.uav;
  r.status.origin = req.origin;
  r.status.destination = req.destination;
  r.status.route = req.route;
  r.status.state = PlanState::kSubmitted;
  if (d.verdict == Verdict::kApproved) {
    int pad = 0;
    auto& pads = pad_slots_.at(req.origin);
    earliest_pad_slot(pads, d.assigned_departure, policy_.departure_separation, &pad);
    pads[static_cast<std::size_t>(pad)].push_back(d.assigned_departure);
    r.pad = pad;
    r.approved = true;
    r.status.state = PlanState::kApproved;
    r.status.assigned_departure = d.assigned_departure;
    r.airways = route_airways(*net_, req.route);
  } else if (d.verdict == Verdict::kRejected) {
    r.status.state = PlanState::kRejected;
  }
  return d;
}

void ControlAuthority::release_slot(Record& r) {
  if (r.pad < 0) return;
  auto& slots = pad_slots_.at(r.request.origin)[static_cast<std::size_t>(r.pad)];
  auto it = std::find(slots.begin(), slots.end(), r.status.assigned_departure);
  if (it != slots.end()) slots.erase(it);
  r.pad = -1;
}

std::vector<PlanId> ControlAuthority::plans_using(const std::set<AirwayId>& airways) const {
  std::vector<PlanId> out;
  for (const auto& [id, r] : plans_) {
    if (!r.approved || is_terminal(r.status.state)) continue;
    if (std::any_of(r.airways.begin(), r.airways.end(), [&](AirwayId w) { return airways.count(w) > 0; }))
      out.push_back(id);
  }
  return out;
}

std::vector<PlanId> ControlAuthority::plans_crossing(const NoFlyZone& zone, Tick now) const {
  std::vector<PlanId> out;
  for (const auto& [id, r] : plans_) {
    if (!r.approved || is_terminal(r.status.state)) continue;
    const FlightPlan& p = r.status;
    std::vector<NodeId> rest = p.route;
    if (p.progress > 1) rest.erase(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(p.progress - 1));
    bool hit = false;
    for (const auto& [a, b] : route_segments(*net_, p.origin, p.destination, rest)) {
      if (segment_intersects_nfz(a, b, zone, now)) {
        hit = true;
        break;
      }
    }
    if (hit) out.push_back(id);
  }
  return out;
}

void ControlAuthority::reslot_held(AirportId airport, Tick now, std::vector<ApprovalDecision>& out) {
  for (auto& [id, r] : plans_) {
    if (!r.held || r.request.origin != airport || is_terminal(r.status.state)) continue;
    int pad = 0;
    auto& pads = pad_slots_.at(airport);
    const Tick slot = earliest_pad_slot(pads, std::max(now, r.request.requested_departure),
                                        policy_.departure_separation, &pad);
    pads[static_cast<std::size_t>(pad)].push_back(slot);
    r.pad = pad;
    r.held = false;
    r.status.assigned_departure = slot;
    out.push_back({id, Verdict::kApproved, "", 0, slot});
  }
}

ControlAck ControlAuthority::issue_airspace_control(const ControlOrder& order, Tick now) {
  ControlAck ack;
  ack.order = order;
  switch (order.kind) {
    case OrderKind::kCloseAirway:
    case OrderKind::kReopenAirway: {
      for (AirwayId w : order.airways) net_->airway(w);
      const std::set<AirwayId> ids(order.airways.begin(), order.airways.end());
      if (order.kind == OrderKind::kCloseAirway) {
        closed_.insert(ids.begin(), ids.end());
        ack.affected = plans_using(ids);
      } else {
        for (AirwayId w : ids) closed_.erase(w);
      }
      break;
    }
    case OrderKind::kActivateNfz: {
      NoFlyZone z = *order.zone;
      validate_zone(z);
      std::erase_if(zones_, [&](const NoFlyZone& e) { return e.id == z.id; });
      zones_.push_back(z);
      ack.affected = plans_crossing(z, now);
      break;
    }
    case OrderKind::kDeactivateNfz: {
      const auto before = zones_.size();
      std::erase_if(zones_, [&](const NoFlyZone& e) { return e.id == order.zone_id; });
      if (zones_.size() == before) throw LookupError("no-fly zone " + std::to_string(order.zone_id) + " is not active");
      break;
    }
    case OrderKind::kGroundStop: {
      net_->airport(order.airport);
      ground_stops_.insert(order.airport);
      for (auto& [id, r] : plans_) {
        if (r.request.origin != order.airport || !r.approved || r.departed || is_terminal(r.status.state)) continue;
        release_slot(r);
        r.held = true;
        ack.affected.push_back(id);
      }
      break;
    }
    case OrderKind::kLiftGroundStop: {
      net_->airport(order.airport);
      ground_stops_.erase(order.airport);
      break;
    }
  }
  airspace_dirty_ = true;
  return ack;
}

void ControlAuthority::observe_plan_state(const FlightPlan& status, Tick /*now*/) {
  auto it = plans_.find(status.id);
  if (it == plans_.end()) return;
  Record& r = it->second;
  if (is_in_flight(status.state)) r.departed = true;
  if (status.state != r.status.state) monitor_.record_transition(status, status.state);
  const Tick assigned = r.status.assigned_departure;
  r.status = status;
  r.status.assigned_departure = assigned;
  if (r.approved && !status.route.empty()) {
    try {
      r.airways = remaining_airways(*net_, status);
    } catch (const LookupError&) {
      r.airways.clear();
    }
  }
  if (is_terminal(status.state)) {
    r.airways.clear();
    if (!r.departed) release_slot(r);
  }
}

std::vector<MonitorEvent> ControlAuthority::observe_telemetry(const nlohmann::json& t) {
  return monitor_.observe(t.at("tick").get<Tick>(), t.at("uav").get<UavId>(), vec3_of(t.at("position")),
                          t.value("airway", AirwayId{0}));
}

std::set<AirwayId> ControlAuthority::blocked_airways(Tick now) const {
  std::set<AirwayId> out = closed_;
  for (const auto& [id, w] : net_->airways) {
    const LocalPoint& a = net_->node(w.a).position;
    const LocalPoint& b = net_->node(w.b).position;
    for (const NoFlyZone& z : zones_)
      if (segment_intersects_nfz(a, b, z, now)) out.insert(id);
  }
  return out;
}

nlohmann::json ControlAuthority::airspace_state(Tick now) const {
  nlohmann::json zones = nlohmann::json::array();
  for (const auto& z : zones_) zones.push_back(zone_to_json(z));
  std::vector<PlanId> held;
  for (const auto& [id, r] : plans_)
    if (r.held && !is_terminal(r.status.state)) held.push_back(id);
  const auto blocked = blocked_airways(now);
  return {{"tick", now},
          {"closed_airways", std::vector<AirwayId>(closed_.begin(), closed_.end())},
          {"blocked_airways", std::vector<AirwayId>(blocked.begin(), blocked.end())},
          {"no_fly_zones", zones},
          {"ground_stops", std::vector<AirportId>(ground_stops_.begin(), ground_stops_.end())},
          {"held", held},
          {"replan", nlohmann::json::array()}};
}

void ControlAuthority::attach(MessageBus& bus) {
  bus_ = &bus;
  sub_submit_ = bus.subscribe("plan/submit");
  sub_order_ = bus.subscribe("control/order");
  sub_state_ = bus.subscribe("plan/state");
  sub_telemetry_ = bus.subscribe("uav/telemetry/*");
}

void ControlAuthority::step(Tick now) {
  if (!bus_) throw SchedulingError("authority: step() before attach()");
  std::vector<ApprovalDecision> decisions;
  std::vector<PlanId> replan;

  for (const Envelope& e : bus_->drain(sub_order_)) {
    nlohmann::json ack = {{"tick", now}, {"order", e.payload}};
    try {
      const ControlOrder order = order_from_json(e.payload);
      const ControlAck result = issue_airspace_control(order, now);
      ack["ok"] = true;
      ack["affected"] = result.affected;
      if (order.kind == OrderKind::kCloseAirway || order.kind == OrderKind::kActivateNfz)
        replan.insert(replan.end(), result.affected.begin(), result.affected.end());
      if (order.kind == OrderKind::kLiftGroundStop) reslot_held(order.airport, now, decisions);
    } catch (const std::exception& ex) {
      ack["ok"] = false;
      ack["error"] = ex.what();
    }
    bus_->publish("airspace/ack", ack, now);
  }
  for (const Envelope& e : bus_->drain(sub_state_)) {
    try {
      observe_plan_state(plan_status_from_json(e.payload), now);
    } catch (const ValidationError&) {
    }
  }
  for (const Envelope& e : bus_->drain(sub_telemetry_)) {
    try {
      observe_telemetry(e.payload);
    } catch (const std::exception&) {
    }
  }

  std::vector<PlanRequest> requests;
  for (const Envelope& e : bus_->drain(sub_submit_)) {
    try {
      requests.push_back(request_from_json(e.payload));
    } catch (const ValidationError&) {
    }
  }
  std::stable_sort(requests.begin(), requests.end(),
                   [](const PlanRequest& a, const PlanRequest& b) { return a.plan < b.plan; });
  for (const PlanRequest& req : requests) {
    try {
      decisions.push_back(submit(req, now));
    } catch (const LookupError&) {
      decisions.push_back({req.plan, Verdict::kRejected, "unknown_airport", 0, 0});
    }
  }

  if (airspace_dirty_) {
    nlohmann::json state = airspace_state(now);
    std::sort(replan.begin(), replan.end());
    replan.erase(std::unique(replan.begin(), replan.end()), replan.end());
    state["replan"] = replan;
    bus_->publish("airspace/state", state, now);
    airspace_dirty_ = false;
  }
  for (const ApprovalDecision& d : decisions) bus_->publish("plan/decision", decision_to_json(d), now);
  if (now % policy_.stats_every == 0 && now > 0) {
    nlohmann::json s = stats_to_json(stats());
    s["tick"] = now;
    bus_->publish("stats/traffic", s, now);
  }
}

}  // namespace skylane
