#include <gtest/gtest.h>

#include <functional>

#include "skylane/airway/network.hpp"
#include "skylane/airway/routing.hpp"
#include "skylane/errors.hpp"
#include "skylane/world/geometry.hpp"
#include "skylane/world/random.hpp"

using namespace skylane;

namespace {

AirwayNetwork triangle() {
  AirwayNetwork net;
  net.nodes[1] = {1, {0, 0, 120}};
  net.nodes[2] = {2, {3, 0, 120}};
  net.nodes[3] = {3, {3, 4, 120}};
  net.airways[1] = {1, 1, 2, 0.2, true, 4};
  net.airways[2] = {2, 2, 3, 0.2, true, 4};
  net.airways[3] = {3, 1, 3, 0.2, true, 4};
  net.airports[1] = {1, {0, -1, 0}, 1, 1};
  net.airports[2] = {2, {4, 4, 0}, 3, 1};
  return net;
}

struct Best {
  double length = 1e18;
  std::vector<NodeId> path;
  bool found = false;
};

// Exhaustive simple-path enumeration.
Best enumerate(const AirwayNetwork& net, NodeId from, NodeId to, const std::set<AirwayId>& closed) {
  Best best;
  std::vector<NodeId> path{from};
  std::set<NodeId> on_path{from};
  std::function<void(NodeId, double)> dfs = [&](NodeId u, double len) {
    if (u == to) {
      const bool tie = std::abs(len - best.length) <= 1e-9 * std::max(1.0, len);
      if (!best.found || (!tie && len < best.length) || (tie && path < best.path)) {
        best = {len, path, true};
      }
      return;
    }
    for (const auto& [id, w] : net.airways) {
      if (closed.contains(id)) continue;
      for (NodeId v : {w.a, w.b}) {
        if (v == u || on_path.contains(v) || !w.permits(u, v)) continue;
        path.push_back(v);
        on_path.insert(v);
        dfs(v, len + (net.node(u).position - net.node(v).position).norm());
        on_path.erase(v);
        path.pop_back();
      }
    }
  };
  dfs(from, 0.0);
  return best;
}

AirwayNetwork random_graph(RandomStream& rng) {
  AirwayNetwork net;
  const int n = static_cast<int>(rng.uniform_int(2, 8));
  for (int i = 1; i <= n; ++i) {
    net.nodes[i] = {static_cast<NodeId>(i), {rng.uniform(0, 1000), rng.uniform(0, 1000), 120}};
  }
  AirwayId next = 1;
  for (int i = 1; i <= n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      if (rng.bernoulli(0.45)) {
        const bool two_way = rng.bernoulli(0.7);
        const bool flip = rng.bernoulli(0.5);
        net.airways[next] = {next, static_cast<NodeId>(flip ? j : i), static_cast<NodeId>(flip ? i : j), 1.0,
                             two_way, 4};
        ++next;
      }
    }
  }
  return net;
}

}  // namespace

TEST(Validate, TriangleIsClean) { EXPECT_TRUE(validate_network(triangle()).empty()); }

TEST(Validate, MissingLinkedNode) {
  auto net = triangle();
  net.airports[3] = {3, {9, 9, 0}, 42, 1};
  const auto v = validate_network(net);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "airport-linked-node");
}

TEST(Validate, DuplicateAirway) {
  auto net = triangle();
  net.airways[4] = {4, 2, 1, 0.2, true, 4};
  const auto v = validate_network(net);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "duplicate-airway");
  EXPECT_EQ(v[0].ids, (std::vector<std::uint32_t>{1, 4}));
}

TEST(Validate, CorridorInterferenceAndDisconnection) {
  AirwayNetwork net;
  net.nodes[1] = {1, {0, 0, 100}};
  net.nodes[2] = {2, {100, 0, 100}};
  net.nodes[3] = {3, {0, 5, 100}};
  net.nodes[4] = {4, {100, 5, 100}};
  net.airways[1] = {1, 1, 2, 10, true, 4};
  net.airways[2] = {2, 3, 4, 10, true, 4};
  net.airports[1] = {1, {0, -20, 0}, 1, 1};
  net.airports[2] = {2, {0, 20, 0}, 3, 1};
  const auto v = validate_network(net);
  std::set<std::string> rules;
  for (const auto& x : v) rules.insert(x.rule);
  EXPECT_TRUE(rules.contains("corridor-interference"));
  EXPECT_TRUE(rules.contains("disconnected"));
}

TEST(Route, SameAirportIsSingleNode) {
  const auto r = shortest_node_route(triangle(), 2, 2);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->nodes, std::vector<NodeId>{2});
  EXPECT_EQ(r->length, 0.0);
}

TEST(Route, DirectEdgeBeatsTwoHop) {
  const auto net = triangle();
  const auto r = shortest_route(net, 1, 2);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->nodes, (std::vector<NodeId>{1, 3}));
  EXPECT_NEAR(r->length, 5.0, 1e-12);
  EXPECT_NEAR(enumerate(net, 1, 3, {}).length, 5.0, 1e-12);
}

TEST(Route, ClosureForcesTwoHop) {
  const auto net = triangle();
  const auto r = shortest_route(net, 1, 2, {3});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->nodes, (std::vector<NodeId>{1, 2, 3}));
  EXPECT_NEAR(r->length, 7.0, 1e-12);
  EXPECT_NEAR(enumerate(net, 1, 3, {3}).length, 7.0, 1e-12);
}

TEST(Route, DisconnectedIsNoRoute) {
  EXPECT_FALSE(shortest_route(triangle(), 1, 2, {1, 3}).has_value());
}

TEST(Route, UnknownAirportThrows) { EXPECT_THROW(shortest_route(triangle(), 1, 77), LookupError); }

TEST(Route, OneWayRespected) {
  auto net = triangle();
  net.airways[3].bidirectional = false;  // 1 -> 3 only
  const auto back = shortest_node_route(net, 3, 1);
  ASSERT_TRUE(back);
  EXPECT_EQ(back->nodes, (std::vector<NodeId>{3, 2, 1}));
}

TEST(Route, TieBreaksLexicographically) {
  AirwayNetwork net;
  net.nodes[1] = {1, {0, 0, 0}};
  net.nodes[2] = {2, {0, 10, 0}};
  net.nodes[3] = {3, {0, -10, 0}};
  net.nodes[4] = {4, {20, 0, 0}};
  net.airways[1] = {1, 1, 3, 1, true, 4};
  net.airways[2] = {2, 3, 4, 1, true, 4};
  net.airways[3] = {3, 1, 2, 1, true, 4};
  net.airways[4] = {4, 2, 4, 1, true, 4};
  const auto r = shortest_node_route(net, 1, 4);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->nodes, (std::vector<NodeId>{1, 2, 4}));
}

TEST(RouteProperty, MatchesExhaustiveEnumeration) {
  RandomStream rng(11, "route-property");
  int compared = 0;
  for (int g = 0; g < 500; ++g) {
    const auto net = random_graph(rng);
    const NodeId from = static_cast<NodeId>(rng.uniform_int(1, static_cast<std::int64_t>(net.nodes.size())));
    const NodeId to = static_cast<NodeId>(rng.uniform_int(1, static_cast<std::int64_t>(net.nodes.size())));
    const auto got = shortest_node_route(net, from, to);
    const Best want = enumerate(net, from, to, {});
    ASSERT_EQ(got.has_value(), want.found) << "graph " << g;
    if (!want.found) continue;
    ++compared;
    ASSERT_NEAR(got->length, want.length, 1e-9 * std::max(1.0, want.length)) << "graph " << g;
    ASSERT_EQ(got->nodes, want.path) << "graph " << g;
    // Edge-connected with permitted direction.
    for (std::size_t i = 0; i + 1 < got->nodes.size(); ++i) {
      bool ok = false;
      for (const auto& [id, w] : net.airways) ok |= w.permits(got->nodes[i], got->nodes[i + 1]);
      ASSERT_TRUE(ok);
    }
  }
  EXPECT_GT(compared, 300);
}

TEST(RouteProperty, AddingAirwayNeverLengthens) {
  RandomStream rng(12, "route-monotone");
  for (int g = 0; g < 200; ++g) {
    auto net = random_graph(rng);
    const auto n = static_cast<std::int64_t>(net.nodes.size());
    const NodeId from = static_cast<NodeId>(rng.uniform_int(1, n));
    const NodeId to = static_cast<NodeId>(rng.uniform_int(1, n));
    const auto before = shortest_node_route(net, from, to);
    const NodeId x = static_cast<NodeId>(rng.uniform_int(1, n));
    const NodeId y = static_cast<NodeId>(rng.uniform_int(1, n));
    if (x == y || net.airway_between(x, y)) continue;
    net.airways[1000] = {1000, x, y, 1.0, true, 4};
    const auto after = shortest_node_route(net, from, to);
    if (before) {
      ASSERT_TRUE(after);
      ASSERT_LE(after->length, before->length + 1e-9);
    }
  }
}

TEST(Grid, SmallestLattice) {
  const auto net = generate_grid_network(2, 2, 100, 120, 1);
  EXPECT_EQ(net.nodes.size(), 4u);
  EXPECT_EQ(net.airways.size(), 4u);
}

TEST(Grid, EdgeCountFormula) {
  const auto net = generate_grid_network(5, 10, 200, 120, 4);
  EXPECT_EQ(net.nodes.size(), 50u);
  // rows*(cols-1) + (rows-1)*cols, cross-checked by counting unordered pairs.
  EXPECT_EQ(net.airways.size(), static_cast<std::size_t>(5 * 9 + 4 * 10));
  std::set<std::pair<NodeId, NodeId>> pairs;
  for (const auto& [id, w] : net.airways) pairs.insert(std::minmax(w.a, w.b));
  EXPECT_EQ(pairs.size(), 85u);
  EXPECT_EQ(net.airports.size(), 13u);
}

TEST(Grid, AltitudeApplied) {
  const auto net = generate_grid_network(3, 4, 150, 120, 2);
  for (const auto& [id, n] : net.nodes) EXPECT_EQ(n.position.z(), 120.0);
}

TEST(Grid, RejectsBadParameters) {
  EXPECT_THROW(generate_grid_network(1, 4, 100, 120, 1), ValidationError);
  EXPECT_THROW(generate_grid_network(3, 4, 0, 120, 1), ValidationError);
}

TEST(GridProperty, AlwaysValid) {
  RandomStream rng(5, "grid-property");
  for (int i = 0; i < 100; ++i) {
    const int rows = static_cast<int>(rng.uniform_int(2, 7));
    const int cols = static_cast<int>(rng.uniform_int(2, 7));
    const auto net = generate_grid_network(rows, cols, rng.uniform(5, 500), rng.uniform(10, 300),
                                           static_cast<int>(rng.uniform_int(1, 5)));
    const auto v = validate_network(net);
    ASSERT_TRUE(v.empty()) << v.front().rule << ": " << v.front().message;
  }
}

TEST(Nearest, PointOnCenterline) {
  const auto net = generate_grid_network(3, 3, 100, 120, 1);
  const auto r = nearest_airway_point(net, {50, 100, 120});
  EXPECT_NEAR(r.distance, 0.0, 1e-12);
  const auto& w = net.airway(r.airway);
  EXPECT_NEAR(point_segment_distance({50, 100, 120}, net.node(w.a).position, net.node(w.b).position), 0.0, 1e-12);
}

TEST(Nearest, EquidistantTieGoesToSmallerId) {
  const auto net = generate_grid_network(2, 2, 100, 120, 1);
  // (50, 50) is exactly 50 m from all four airways.
  const auto r = nearest_airway_point(net, {50, 50, 120});
  EXPECT_EQ(r.distance, 50.0);
  EXPECT_EQ(r.airway, 1u);
}

TEST(Nearest, MatchesBruteForce) {
  const auto net = generate_grid_network(4, 5, 120, 120, 3);
  RandomStream rng(3, "nearest");
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(rng.uniform(-50, 600), rng.uniform(-50, 500), rng.uniform(0, 200));
    double best = 1e18;
    AirwayId best_id = 0;
    for (const auto& [id, w] : net.airways) {
      const double d = point_segment_distance(p, net.node(w.a).position, net.node(w.b).position);
      if (d < best) {
        best = d;
        best_id = id;
      }
    }
    const auto r = nearest_airway_point(net, p);
    ASSERT_EQ(r.airway, best_id);
    ASSERT_EQ(r.distance, best);
  }
}

TEST(Nearest, EmptyNetworkThrows) { EXPECT_THROW(nearest_airway_point(AirwayNetwork{}, {0, 0, 0}), LookupError); }

TEST(Pads, RowPerpendicularToNode) {
  auto net = triangle();
  net.airports[1].pads = 3;
  const auto pads = pad_positions(net, 1, 12.0);
  ASSERT_EQ(pads.size(), 3u);
  EXPECT_NEAR((pads[0] - pads[1]).norm(), 12.0, 1e-12);
  // Airport 1 sits directly south of node 1: the row runs east-west.
  EXPECT_NEAR(pads[0].y(), -1.0, 1e-12);
  EXPECT_NEAR(pads[1].x(), 0.0, 1e-12);
}

TEST(NetworkJson, RoundTrip) {
  const auto net = generate_grid_network(3, 3, 100, 120, 2);
  const auto back = network_from_json(network_to_json(net));
  EXPECT_EQ(network_to_json(back), network_to_json(net));
}
