#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylane/world/types.hpp"

namespace skylane {

struct AirwayNode {
  NodeId id = 0;
  LocalPoint position = LocalPoint::Zero();
};

struct Airport {
  AirportId id = 0;
  LocalPoint ground_position = LocalPoint::Zero();
  NodeId linked_node = 0;
  int pads = 1;
};

struct Airway {
  AirwayId id = 0;
  NodeId a = 0;
  NodeId b = 0;
  double corridor_radius = 10.0;
  bool bidirectional = true;
  int capacity = 4;

  bool permits(NodeId from, NodeId to) const {
    return (from == a && to == b) || (bidirectional && from == b && to == a);
  }
  bool joins(NodeId x, NodeId y) const { return (x == a && y == b) || (x == b && y == a); }
};

struct Violation {
  std::string rule;
  std::vector<std::uint32_t> ids;
  std::string message;
};

/// Corridor graph of nodes, airports and straight airways. Containers are
/// keyed by id so iteration order is deterministic.
class AirwayNetwork {
 public:
  std::map<NodeId, AirwayNode> nodes;
  std::map<AirportId, Airport> airports;
  std::map<AirwayId, Airway> airways;

  const AirwayNode& node(NodeId id) const;
  const Airport& airport(AirportId id) const;
  const Airway& airway(AirwayId id) const;
  bool empty() const { return airways.empty(); }

  /// The airway joining x and y (either direction), if any.
  std::optional<AirwayId> airway_between(NodeId x, NodeId y) const;
  double airway_length(AirwayId id) const;

  /// Adjacency: for each node, (neighbor, airway id) pairs that may be flown
  /// from the node. Rebuilt on demand.
  std::map<NodeId, std::vector<std::pair<NodeId, AirwayId>>> outgoing() const;
};

/// Empty iff every structural invariant holds.
std::vector<Violation> validate_network(const AirwayNetwork& net);

/// Lattice of rows x cols nodes at `altitude` with bidirectional airways along
/// rows and columns; an airport hangs off every `airport_every`-th node.
AirwayNetwork generate_grid_network(int rows, int cols, double spacing, double altitude, int airport_every);

struct AirwayPoint {
  AirwayId airway = 0;
  LocalPoint point = LocalPoint::Zero();
  double distance = 0.0;
};

/// Closest centerline point over all airways; ties go to the smaller id.
AirwayPoint nearest_airway_point(const AirwayNetwork& net, const LocalPoint& p);

/// Ground positions of an airport's pads: a row perpendicular to the
/// airport-to-node direction, centered on the airport, `spacing` apart.
std::vector<LocalPoint> pad_positions(const AirwayNetwork& net, AirportId airport, double spacing = 12.0);

AirwayNetwork network_from_json(const nlohmann::json& j);
nlohmann::json network_to_json(const AirwayNetwork& net);

}  // namespace skylane
