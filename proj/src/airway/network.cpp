#include "skylane/airway/network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "skylane/errors.hpp"
#include "skylane/world/geometry.hpp"

namespace skylane {

const AirwayNode& AirwayNetwork::node(NodeId id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) throw LookupError("unknown node " + std::to_string(id));
  return it->second;
}

const Airport& AirwayNetwork::airport(AirportId id) const {
  auto it = airports.find(id);
  if (it == airports.end()) throw LookupError("unknown airport " + std::to_string(id));
  return it->second;
}

const Airway& AirwayNetwork::airway(AirwayId id) const {
  auto it = airways.find(id);
  if (it == airways.end()) throw LookupError("unknown airway " + std::to_string(id));
  return it->second;
}

std::optional<AirwayId> AirwayNetwork::airway_between(NodeId x, NodeId y) const {
  for (const auto& [id, w] : airways) {
    if (w.joins(x, y)) return id;
  }
  return std::nullopt;
}

double AirwayNetwork::airway_length(AirwayId id) const {
  const Airway& w = airway(id);
  return (node(w.a).position - node(w.b).position).norm();
}

std::map<NodeId, std::vector<std::pair<NodeId, AirwayId>>> AirwayNetwork::outgoing() const {
  std::map<NodeId, std::vector<std::pair<NodeId, AirwayId>>> adj;
  for (const auto& [id, w] : airways) {
    adj[w.a].emplace_back(w.b, id);
    if (w.bidirectional) adj[w.b].emplace_back(w.a, id);
  }
  for (auto& [n, list] : adj) std::sort(list.begin(), list.end());
  return adj;
}

std::vector<Violation> validate_network(const AirwayNetwork& net) {
  std::vector<Violation> out;
  auto add = [&](std::string rule, std::vector<std::uint32_t> ids, std::string msg) {
    out.push_back({std::move(rule), std::move(ids), std::move(msg)});
  };

  for (const auto& [id, n] : net.nodes) {
    if (id != n.id) add("node-id", {id}, "node key does not match its id");
    if (!n.position.allFinite()) add("node-position", {id}, "node position not finite");
  }
  for (const auto& [id, ap] : net.airports) {
    if (id != ap.id) add("airport-id", {id}, "airport key does not match its id");
    if (!net.nodes.contains(ap.linked_node)) {
      add("airport-linked-node", {id, ap.linked_node}, "airport links to a missing node");
    }
    if (ap.pads < 1) add("airport-pads", {id}, "airport needs at least one pad");
  }

  std::map<std::pair<NodeId, NodeId>, AirwayId> seen;
  for (const auto& [id, w] : net.airways) {
    if (id != w.id) add("airway-id", {id}, "airway key does not match its id");
    if (w.a == w.b) add("airway-endpoints", {id}, "airway endpoints must differ");
    if (!net.nodes.contains(w.a) || !net.nodes.contains(w.b)) {
      add("airway-endpoints", {id, w.a, w.b}, "airway endpoint missing");
    }
    if (!(w.corridor_radius > 0.0)) add("airway-radius", {id}, "corridor radius must be > 0");
    if (w.capacity < 1) add("airway-capacity", {id}, "capacity must be >= 1");
    const auto key = std::minmax(w.a, w.b);
    auto [it, inserted] = seen.emplace(std::pair{key.first, key.second}, id);
    if (!inserted) add("duplicate-airway", {it->second, id}, "two airways join the same node pair");
  }

  // Corridor non-interference between airways without a shared endpoint.
  std::vector<const Airway*> ways;
  for (const auto& [id, w] : net.airways) {
    if (net.nodes.contains(w.a) && net.nodes.contains(w.b) && w.a != w.b) ways.push_back(&w);
  }
  for (std::size_t i = 0; i < ways.size(); ++i) {
    for (std::size_t j = i + 1; j < ways.size(); ++j) {
      const Airway& p = *ways[i];
      const Airway& q = *ways[j];
      if (p.a == q.a || p.a == q.b || p.b == q.a || p.b == q.b) continue;
      const double d = segment_segment_distance(net.nodes.at(p.a).position, net.nodes.at(p.b).position,
                                                net.nodes.at(q.a).position, net.nodes.at(q.b).position);
      if (d < p.corridor_radius + q.corridor_radius) {
        std::ostringstream msg;
        msg << "corridors interfere: centerline distance " << d << " m";
        add("corridor-interference", {p.id, q.id}, msg.str());
      }
    }
  }

  // Connectivity over airport-linked nodes, ignoring direction.
  std::set<NodeId> linked;
  for (const auto& [id, ap] : net.airports) {
    if (net.nodes.contains(ap.linked_node)) linked.insert(ap.linked_node);
  }
  if (linked.size() > 1) {
    std::map<NodeId, std::vector<NodeId>> adj;
    for (const auto& [id, w] : net.airways) {
      adj[w.a].push_back(w.b);
      adj[w.b].push_back(w.a);
    }
    std::set<NodeId> reached{*linked.begin()};
    std::queue<NodeId> frontier;
    frontier.push(*linked.begin());
    while (!frontier.empty()) {
      const NodeId n = frontier.front();
      frontier.pop();
      for (NodeId m : adj[n]) {
        if (reached.insert(m).second) frontier.push(m);
      }
    }
    for (NodeId n : linked) {
      if (!reached.contains(n)) add("disconnected", {n}, "airport node not reachable from the rest of the network");
    }
  }
  return out;
}

AirwayNetwork generate_grid_network(int rows, int cols, double spacing, double altitude, int airport_every) {
  if (rows < 2 || cols < 2) throw ValidationError("grid needs rows, cols >= 2");
  if (!(spacing > 0.0) || !std::isfinite(altitude)) throw ValidationError("grid spacing must be > 0");
  if (airport_every < 1) throw ValidationError("airport_every must be >= 1");

  AirwayNetwork net;
  auto id_of = [cols](int r, int c) { return static_cast<NodeId>(r * cols + c + 1); };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const NodeId id = id_of(r, c);
      net.nodes[id] = {id, LocalPoint(c * spacing, r * spacing, altitude)};
    }
  }
  const double radius = std::min(10.0, spacing / 4.0);
  AirwayId next = 1;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      net.airways[next] = {next, id_of(r, c), id_of(r, c + 1), radius, true, 4};
      ++next;
    }
  }
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      net.airways[next] = {next, id_of(r, c), id_of(r + 1, c), radius, true, 4};
      ++next;
    }
  }
  AirportId ap = 1;
  const double offset = spacing * 0.1;
  for (const auto& [id, n] : net.nodes) {
    if ((id - 1) % static_cast<NodeId>(airport_every) != 0) continue;
    net.airports[ap] = {ap, LocalPoint(n.position.x() + offset, n.position.y() + offset, 0.0), id, 1};
    ++ap;
  }
  return net;
}

AirwayPoint nearest_airway_point(const AirwayNetwork& net, const LocalPoint& p) {
  if (net.airways.empty()) throw LookupError("nearest_airway_point: empty network");
  AirwayPoint best;
  bool have = false;
  for (const auto& [id, w] : net.airways) {
    const Vec3 q = closest_point_on_segment(p, net.node(w.a).position, net.node(w.b).position);
    const double d = (p - q).norm();
    if (!have || d < best.distance) {
      best = {id, q, d};
      have = true;
    }
  }
  return best;
}

std::vector<LocalPoint> pad_positions(const AirwayNetwork& net, AirportId airport, double spacing) {
  const Airport& ap = net.airport(airport);
  const LocalPoint& node = net.node(ap.linked_node).position;
  Vec2 toward = node.head<2>() - ap.ground_position.head<2>();
  Vec2 row = toward.norm() > 1e-6 ? Vec2(-toward.y(), toward.x()).normalized() : Vec2(1.0, 0.0);
  std::vector<LocalPoint> pads;
  pads.reserve(static_cast<std::size_t>(ap.pads));
  for (int i = 0; i < ap.pads; ++i) {
    const double k = i - 0.5 * (ap.pads - 1);
    const Vec2 xy = ap.ground_position.head<2>() + k * spacing * row;
    pads.emplace_back(xy.x(), xy.y(), ap.ground_position.z());
  }
  return pads;
}

AirwayNetwork network_from_json(const nlohmann::json& j) {
  AirwayNetwork net;
  try {
    for (const auto& n : j.at("nodes")) {
      const NodeId id = n.at("id").get<NodeId>();
      if (net.nodes.contains(id)) throw ValidationError("duplicate node id " + std::to_string(id));
      net.nodes[id] = {id, LocalPoint(n.at("e").get<double>(), n.at("n").get<double>(), n.at("u").get<double>())};
    }
    for (const auto& a : j.at("airports")) {
      Airport ap;
      ap.id = a.at("id").get<AirportId>();
      ap.ground_position = LocalPoint(a.at("e").get<double>(), a.at("n").get<double>(), a.value("u", 0.0));
      ap.linked_node = a.at("node").get<NodeId>();
      ap.pads = a.value("pads", 1);
      if (net.airports.contains(ap.id)) throw ValidationError("duplicate airport id " + std::to_string(ap.id));
      net.airports[ap.id] = ap;
    }
    for (const auto& w : j.at("airways")) {
      Airway way;
      way.id = w.at("id").get<AirwayId>();
      way.a = w.at("a").get<NodeId>();
      way.b = w.at("b").get<NodeId>();
      way.corridor_radius = w.value("radius", 10.0);
      way.bidirectional = w.value("bidirectional", true);
      way.capacity = w.value("capacity", 4);
      if (net.airways.contains(way.id)) throw ValidationError("duplicate airway id " + std::to_string(way.id));
      net.airways[way.id] = way;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("network: ") + e.what());
  }
  return net;
}

nlohmann::json network_to_json(const AirwayNetwork& net) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& [id, n] : net.nodes) {
    j["nodes"].push_back({{"id", id}, {"e", n.position.x()}, {"n", n.position.y()}, {"u", n.position.z()}});
  }
  j["airports"] = nlohmann::json::array();
  for (const auto& [id, a] : net.airports) {
    j["airports"].push_back({{"id", id},
                             {"e", a.ground_position.x()},
                             {"n", a.ground_position.y()},
                             {"u", a.ground_position.z()},
                             {"node", a.linked_node},
                             {"pads", a.pads}});
  }
  j["airways"] = nlohmann::json::array();
  for (const auto& [id, w] : net.airways) {
    j["airways"].push_back({{"id", id},
                            {"a", w.a},
                            {"b", w.b},
                            {"radius", w.corridor_radius},
                            {"bidirectional", w.bidirectional},
                            {"capacity", w.capacity}});
  }
  return j;
}

}  // namespace skylane
