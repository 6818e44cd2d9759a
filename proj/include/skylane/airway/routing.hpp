#pragma once

#include <optional>
#include <set>
#include <vector>

#include "skylane/airway/network.hpp"

namespace skylane {

struct Route {
  std::vector<NodeId> nodes;
  double length = 0.0;
};

/// Minimum-length route between two nodes over airways not in `closed`,
/// honoring one-way airways. Equal-length routes (within 1e-9 relative) are
/// broken by the lexicographically smallest node sequence.
std::optional<Route> shortest_node_route(const AirwayNetwork& net, NodeId from, NodeId to,
                                         const std::set<AirwayId>& closed = {});

/// Route between the linked nodes of two airports. Throws LookupError for
/// unknown airports; nullopt when closures disconnect them.
std::optional<Route> shortest_route(const AirwayNetwork& net, AirportId from, AirportId to,
                                    const std::set<AirwayId>& closed = {});

/// Airway ids traversed by consecutive node pairs of `nodes`.
std::vector<AirwayId> route_airways(const AirwayNetwork& net, const std::vector<NodeId>& nodes);

/// Sum of centerline lengths along a node sequence.
double route_length(const AirwayNetwork& net, const std::vector<NodeId>& nodes);

}  // namespace skylane
