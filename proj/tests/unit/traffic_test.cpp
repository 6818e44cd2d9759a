#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "skylane/airway/routing.hpp"
#include "skylane/authority/authority.hpp"
#include "skylane/errors.hpp"
#include "skylane/traffic/traffic.hpp"

using namespace skylane;

namespace {

// Square 1-2-3-4 with 150 m sides plus a diagonal-free layout; airports at 1 and 3.
Scenario square() {
  Scenario s;
  auto& net = s.network;
  net.nodes[1] = {1, {0, 0, 40}};
  net.nodes[2] = {2, {150, 0, 40}};
  net.nodes[3] = {3, {150, 150, 40}};
  net.nodes[4] = {4, {0, 150, 40}};
  net.airways[1] = {1, 1, 2, 10.0, true, 4};
  net.airways[2] = {2, 2, 3, 10.0, true, 4};
  net.airways[3] = {3, 3, 4, 10.0, true, 4};
  net.airways[4] = {4, 4, 1, 10.0, true, 4};
  net.airports[1] = {1, {-30, -30, 0}, 1, 2};
  net.airports[2] = {2, {180, 180, 0}, 3, 2};
  FleetEntry a;
  a.id = 1;
  a.home = 1;
  FleetEntry b;
  b.id = 2;
  b.home = 2;
  s.fleet = {a, b};
  s.demands = {{1, 1, 2, 20, ""}};
  return s;
}

// Point-mass vehicles that fly straight at their commanded target.
struct Harness {
  Scenario scenario;
  MessageBus bus{7};
  ControlAuthority authority;
  TrafficManager traffic;
  SubscriptionId states;
  std::map<UavId, std::pair<LocalPoint, Vec3>> vehicles;
  std::map<UavId, UavCommand> commands;
  SubscriptionId cmds;
  std::vector<nlohmann::json> history;
  std::map<UavId, double> weakest_motor;
  std::map<UavId, LocalPoint> last_position;

  explicit Harness(Scenario s)
      : scenario(std::move(s)),
        authority(scenario.network, scenario.no_fly_zones, scenario.policy),
        traffic(scenario) {
    authority.attach(bus);
    traffic.attach(bus);
    states = bus.subscribe("plan/state");
    cmds = bus.subscribe("uav/cmd/*");
  }

  void run(Tick from, Tick to) {
    const double dt = 1.0 / 30.0;
    for (Tick t = from; t < to; ++t) {
      bus.deliver_due(t);
      for (const auto& e : bus.drain(states)) {
        history.push_back(e.payload);
        const auto p = plan_status_from_json(e.payload);
        if (p.state == PlanState::kTakingOff && !vehicles.count(p.uav)) {
          const auto pads = pad_positions(scenario.network, p.origin, scenario.traffic.pad_spacing);
          vehicles[p.uav] = {pads[static_cast<std::size_t>(p.departure_pad)], Vec3::Zero()};
        }
        if (is_terminal(p.state)) {
          if (vehicles.count(p.uav)) last_position[p.uav] = vehicles[p.uav].first;
          vehicles.erase(p.uav);
          commands.erase(p.uav);
        }
      }
      for (const auto& e : bus.drain(cmds)) {
        const auto c = command_from_json(e.payload);
        commands[c.uav] = c;
      }
      authority.step(t);
      traffic.step(t);
      for (auto& [id, v] : vehicles) {
        auto& [pos, vel] = v;
        auto it = commands.find(id);
        vel = Vec3::Zero();
        if (it != commands.end()) {
          const Vec3 d = it->second.setpoint.target - pos;
          const double step = std::min(it->second.setpoint.speed_limit * dt, d.norm());
          if (d.norm() > 1e-9) vel = d.normalized() * step / dt;
        }
        pos += vel * dt;
        if (pos.z() < 0.0) {
          pos.z() = 0.0;
          vel.z() = 0.0;
        }
        nlohmann::json tel = {{"uav", id},
                              {"tick", t},
                              {"position", {pos.x(), pos.y(), pos.z()}},
                              {"velocity", {vel.x(), vel.y(), vel.z()}}};
        if (auto w = weakest_motor.find(id); w != weakest_motor.end()) tel["health"] = {1.0, 1.0, w->second, 1.0};
        bus.publish("uav/telemetry/" + std::to_string(id), tel, t);
      }
    }
  }

  std::vector<std::string> states_of(PlanId id) const {
    std::vector<std::string> out;
    for (const auto& j : history)
      if (j["plan"] == id && (out.empty() || out.back() != j["state"])) out.push_back(j["state"]);
    return out;
  }
};

}  // namespace

TEST(Separation, ScaleEndpoints) {
  EXPECT_DOUBLE_EQ(separation_scale(7.5, 15), 0.0);
  EXPECT_DOUBLE_EQ(separation_scale(5, 15), 0.0);
  EXPECT_DOUBLE_EQ(separation_scale(15, 15), 1.0);
  EXPECT_DOUBLE_EQ(separation_scale(100, 15), 1.0);
  EXPECT_NEAR(separation_scale(11.25, 15), 0.5, 1e-12);
}

TEST(Separation, LoneVehicleUnscaled) {
  std::vector<SeparationEntry> one = {{3, {0, 0, 40}, {1, 0, 0}, 1, 1}};
  EXPECT_DOUBLE_EQ(separation_scales(one, 15, 4).at(3), 1.0);
}

TEST(Separation, FiveVehicleChainScalesFollowersOnly) {
  std::vector<SeparationEntry> chain;
  for (int i = 0; i < 5; ++i)
    chain.push_back({static_cast<UavId>(10 + i), {100.0 - 10.0 * i, 5, 40}, {1, 0, 0}, 1, 1});
  const auto s = separation_scales(chain, 15, 4);
  EXPECT_DOUBLE_EQ(s.at(10), 1.0);
  for (UavId id = 11; id < 15; ++id) EXPECT_NEAR(s.at(id), (10.0 - 7.5) / 7.5, 1e-12);
  // A follower at the stop distance is halted.
  chain[2].position = chain[1].position - Vec3(7.5, 0, 0);
  EXPECT_DOUBLE_EQ(separation_scales(chain, 15, 4).at(12), 0.0);
}

TEST(Separation, OpposingLanesDoNotInteract) {
  std::vector<SeparationEntry> v = {{1, {0, 5, 40}, {1, 0, 0}, 1, 1}, {2, {10, -5, 40}, {-1, 0, 0}, 1, -1}};
  const auto s = separation_scales(v, 15, 4);
  EXPECT_DOUBLE_EQ(s.at(1), 1.0);
  EXPECT_DOUBLE_EQ(s.at(2), 1.0);
}

TEST(Separation, ForwardCorridorAndMutualConflict) {
  // Off-airway: 2 is 10 m straight ahead of 1.
  std::vector<SeparationEntry> v = {{1, {0, 0, 40}, {1, 0, 0}, 0, 0}, {2, {10, 1, 40}, {0, 1, 0}, 0, 0}};
  auto s = separation_scales(v, 15, 4);
  EXPECT_NEAR(s.at(1), separation_scale(std::hypot(10.0, 1.0), 15), 1e-12);
  EXPECT_DOUBLE_EQ(s.at(2), 1.0);
  // Head-on: the lower id yields nothing; the higher id is scaled.
  v = {{1, {0, 0, 40}, {1, 0, 0}, 0, 0}, {2, {10, 0, 40}, {-1, 0, 0}, 0, 0}};
  s = separation_scales(v, 15, 4);
  EXPECT_DOUBLE_EQ(s.at(1), 1.0);
  EXPECT_LT(s.at(2), 1.0);
}

TEST(NodeGate, FifoThenDistanceThenId) {
  NodeGate g;
  g.request(5, 9, 10, 50.0);
  g.request(5, 3, 10, 60.0);
  g.request(5, 7, 4, 90.0);
  g.request(5, 2, 10, 50.0);
  std::vector<UavId> order;
  for (int i = 0; i < 4; ++i) {
    g.grant();
    const auto o = g.owner(5);
    ASSERT_TRUE(o.has_value());
    order.push_back(*o);
    g.release(5, *o);
  }
  EXPECT_EQ(order, (std::vector<UavId>{7, 2, 9, 3}));
  g.grant();
  EXPECT_FALSE(g.owner(5).has_value());
}

TEST(NodeGate, ForgetDropsOwnershipAndRequests) {
  NodeGate g;
  g.request(1, 4, 0, 1.0);
  g.request(2, 4, 0, 1.0);
  g.grant();
  g.request(1, 5, 1, 1.0);
  g.forget(4);
  EXPECT_FALSE(g.owns(2, 4));
  g.grant();
  EXPECT_TRUE(g.owns(1, 5));
}

TEST(Waypoints, StructureAndLaneOffsets) {
  const auto s = square();
  TrafficParams tp;
  const std::vector<NodeId> route = {1, 2, 3};
  const LocalPoint dep(-30, -30, 0), arr(180, 180, 0);
  const auto w = build_waypoints(s.network, route, PathStart::kPad, 0, 1, 2, dep, arr, tp);
  ASSERT_EQ(w.size(), 3 + 2 * 2 + 3u);
  EXPECT_EQ(w[0].phase, PlanState::kTakingOff);
  EXPECT_TRUE(w[0].point.isApprox(LocalPoint(-30, -30, 40)));
  // Connector gate on the node-to-airport diagonal, gated by the first node.
  const double g = tp.gate_distance() / std::sqrt(2.0);
  EXPECT_TRUE(w[1].point.isApprox(LocalPoint(-g, -g, 40)));
  EXPECT_EQ(w[1].start_node, 1u);
  EXPECT_EQ(w[2].start_node, 0u);
  EXPECT_EQ(w[2].route_index, 1u);
  // Leg 1->2 heads east: right of travel is south.
  EXPECT_TRUE(w[3].point.isApprox(LocalPoint(0, -5, 40)));
  EXPECT_TRUE(w[4].point.isApprox(LocalPoint(150, -5, 40)));
  EXPECT_EQ(w[4].approach_node, 2u);
  // Leg 2->3 heads north: right is east.
  EXPECT_TRUE(w[5].point.isApprox(LocalPoint(155, 0, 40)));
  EXPECT_TRUE(w[6].point.isApprox(LocalPoint(155, 150, 40)));
  EXPECT_EQ(w[6].approach_node, 3u);
  EXPECT_EQ(w[6].route_index, 3u);
  EXPECT_TRUE(w[7].point.isApprox(LocalPoint(150 + g, 150 + g, 40)));
  EXPECT_TRUE(w[8].point.isApprox(LocalPoint(180, 180, 40)));
  EXPECT_EQ(w[9].phase, PlanState::kLanding);
  EXPECT_NEAR(w[9].point.z(), -tp.landing_depth, 1e-12);
  // Restarting partway keeps only the remaining legs.
  const auto tail = build_waypoints(s.network, route, PathStart::kLaneEnd, 1, 1, 2, dep, arr, tp);
  ASSERT_EQ(tail.size(), 4u);
  EXPECT_TRUE(tail[0].point.isApprox(LocalPoint(155, 150, 40)));
}

TEST(NodeGate, SkipsInadmissibleRequests) {
  NodeGate g;
  g.request(5, 7, 0, 20.0, 100, 1);
  g.request(5, 8, 0, 30.0, 100, 2);
  g.request(5, 9, 1, 25.0, 200, 2);
  // 7's outgoing lane is full and 8 is behind 7 on lane 100.
  const auto admissible = [](UavId uav, LaneKey, LaneKey out) { return out != 1 && uav != 8; };
  g.grant(admissible);
  EXPECT_TRUE(g.owns(5, 9));
  g.release(5, 9);
  g.grant(admissible);
  EXPECT_FALSE(g.owner(5).has_value());
  g.grant();
  EXPECT_TRUE(g.owns(5, 7));
}

TEST(Waypoints, ConnectorGateClampsToAirportDistance) {
  const auto s = square();
  TrafficParams tp;
  tp.s_min = 40.0;  // gate distance 50 exceeds the 42.4 m airport offset
  tp.request_distance = 60.0;
  const auto g = connector_gate(s.network, 1, tp);
  ASSERT_TRUE(g.has_value());
  EXPECT_TRUE(g->isApprox(LocalPoint(-30, -30, 40)));
}

TEST(Plan, MissionUsesShortestOpenRoute) {
  const auto s = square();
  const auto p = plan_mission(s.demands[0], s.network, {}, 1, 1);
  EXPECT_EQ(p.state, PlanState::kDraft);
  EXPECT_EQ(p.route, (std::vector<NodeId>{1, 2, 3}));
  const auto closed = plan_mission(s.demands[0], s.network, {1}, 1, 1);
  EXPECT_EQ(closed.route, (std::vector<NodeId>{1, 4, 3}));
  const auto none = plan_mission(s.demands[0], s.network, {1, 4}, 1, 1);
  EXPECT_EQ(none.state, PlanState::kAborted);
  EXPECT_EQ(none.reason, "unreachable");
}

TEST(Command, JsonRoundTrip) {
  UavCommand c;
  c.uav = 4;
  c.plan = 2;
  c.setpoint.mode = SetpointMode::kWaypoint;
  c.setpoint.target = {1, 2, 3};
  c.setpoint.speed_limit = 6;
  c.airway = 9;
  c.phase = PlanState::kEnroute;
  const auto back = command_from_json(command_to_json(c, 11));
  EXPECT_EQ(back.uav, 4u);
  EXPECT_EQ(back.airway, 9u);
  EXPECT_TRUE(back.setpoint.target.isApprox(Vec3(1, 2, 3)));
  EXPECT_DOUBLE_EQ(back.setpoint.speed_limit, 6.0);
  EXPECT_EQ(back.phase, PlanState::kEnroute);
  EXPECT_THROW(command_from_json({{"uav", 1}}), ValidationError);
}

TEST(TrafficManager, FlightLifecycleAndTakeoffAtAssignedTick) {
  Harness h(square());
  h.run(0, 3000);
  EXPECT_EQ(h.states_of(1),
            (std::vector<std::string>{"submitted", "approved", "taking-off", "enroute", "landing", "completed"}));
  const auto& p = h.traffic.plans().at(1);
  EXPECT_EQ(p.assigned_departure, 20u);
  for (const auto& j : h.history) {
    if (j["state"] == "taking-off") {
      EXPECT_EQ(j["tick"].get<Tick>(), 20u);
      break;
    }
  }
  EXPECT_TRUE(h.traffic.all_terminal());
  // Every published transition is legal.
  std::map<PlanId, PlanState> last;
  for (const auto& j : h.history) {
    const auto st = plan_state_from(j["state"]);
    auto it = last.find(j["plan"]);
    if (it != last.end() && it->second != st) EXPECT_TRUE(legal_transition(it->second, st));
    last[j["plan"]] = st;
  }
}

TEST(TrafficManager, ClosureReroutesToReducedGraphShortestRoute) {
  Harness h(square());
  h.run(0, 40);
  ASSERT_EQ(h.traffic.plans().at(1).route, (std::vector<NodeId>{1, 2, 3}));
  h.bus.publish("control/order", order_to_json({OrderKind::kCloseAirway, {2}, {}, 0, 0, "t"}), 40);
  h.run(40, 3000);
  const auto& p = h.traffic.plans().at(1);
  const auto oracle = shortest_node_route(h.scenario.network, 1, 3, {2});
  ASSERT_TRUE(oracle.has_value());
  EXPECT_EQ(p.route, oracle->nodes);
  EXPECT_EQ(p.state, PlanState::kCompleted);
}

TEST(TrafficManager, MotorFaultLandsInPlaceAndAborts) {
  Harness h(square());
  h.run(0, 400);
  ASSERT_EQ(h.traffic.plans().at(1).state, PlanState::kEnroute);
  const LocalPoint at_fault = h.vehicles.at(1).first;
  h.weakest_motor[1] = 0.5;
  h.run(400, 3000);
  const auto& p = h.traffic.plans().at(1);
  EXPECT_EQ(p.state, PlanState::kAborted);
  EXPECT_EQ(p.reason, "emergency landing");
  const auto states = h.states_of(1);
  ASSERT_GE(states.size(), 2u);
  EXPECT_EQ(states[states.size() - 2], "landing");
  const LocalPoint down = h.last_position.at(1);
  EXPECT_LE(down.z(), h.scenario.traffic.touchdown_altitude);
  EXPECT_LT(std::hypot(down.x() - at_fault.x(), down.y() - at_fault.y()), 1.0);
}

TEST(TrafficManager, DisconnectedDemandAborts) {
  auto s = square();
  s.network.airways.erase(2);
  s.network.airways.erase(3);
  Harness h(s);
  h.run(0, 10);
  EXPECT_EQ(h.traffic.plans().at(1).state, PlanState::kAborted);
  EXPECT_EQ(h.traffic.plans().at(1).reason, "unreachable");
}

TEST(TrafficManager, QueuedDeparturesKeepSeparation) {
  auto s = square();
  FleetEntry extra;
  for (UavId id = 3; id <= 6; ++id) {
    extra.id = id;
    extra.home = 1;
    s.fleet.push_back(extra);
  }
  s.demands.clear();
  for (DemandId d = 1; d <= 5; ++d) s.demands.push_back({d, 1, 2, 0, ""});
  s.policy.departure_separation = 0;
  s.network.airways[1].capacity = 10;
  s.network.airways[2].capacity = 10;
  Harness h(s);
  double min_gap = 1e9;
  for (Tick t = 0; t < 6000 && !h.traffic.all_terminal(); t += 10) {
    h.run(t, t + 10);
    for (auto a = h.vehicles.begin(); a != h.vehicles.end(); ++a)
      for (auto b = std::next(a); b != h.vehicles.end(); ++b)
        min_gap = std::min(min_gap, (a->second.first - b->second.first).norm());
  }
  EXPECT_TRUE(h.traffic.all_terminal());
  for (const auto& [id, p] : h.traffic.plans()) EXPECT_EQ(p.state, PlanState::kCompleted) << id;
  EXPECT_GE(min_gap, s.traffic.s_stop());
}
