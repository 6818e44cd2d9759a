#include "skylane/airway/routing.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "skylane/errors.hpp"

namespace skylane {
namespace {

struct Label {
  double dist = 0.0;
  std::vector<NodeId> path;
};

bool tie(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

bool better(double d, const std::vector<NodeId>& p, const Label& cur) {
  if (tie(d, cur.dist)) return p < cur.path;
  return d < cur.dist;
}

}  // namespace

std::optional<Route> shortest_node_route(const AirwayNetwork& net, NodeId from, NodeId to,
                                         const std::set<AirwayId>& closed) {
  net.node(from);
  net.node(to);
  if (from == to) return Route{{from}, 0.0};

  const auto adj = net.outgoing();
  std::map<NodeId, Label> best;
  std::set<NodeId> settled;
  using Entry = std::pair<double, NodeId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  best[from] = {0.0, {from}};
  heap.emplace(0.0, from);

  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled.contains(u) || d > best[u].dist) continue;
    settled.insert(u);
    if (u == to) break;
    auto it = adj.find(u);
    if (it == adj.end()) continue;
    const Label& lu = best[u];
    for (const auto& [v, way] : it->second) {
      if (closed.contains(way) || settled.contains(v)) continue;
      const double nd = lu.dist + (net.nodes.at(u).position - net.nodes.at(v).position).norm();
      std::vector<NodeId> np = lu.path;
      np.push_back(v);
      auto found = best.find(v);
      if (found == best.end() || better(nd, np, found->second)) {
        best[v] = {nd, std::move(np)};
        heap.emplace(nd, v);
      }
    }
  }
  auto it = best.find(to);
  if (it == best.end()) return std::nullopt;
  return Route{it->second.path, it->second.dist};
}

std::optional<Route> shortest_route(const AirwayNetwork& net, AirportId from, AirportId to,
                                    const std::set<AirwayId>& closed) {
  const Airport& a = net.airport(from);
  const Airport& b = net.airport(to);
  return shortest_node_route(net, a.linked_node, b.linked_node, closed);
}

std::vector<AirwayId> route_airways(const AirwayNetwork& net, const std::vector<NodeId>& nodes) {
  std::vector<AirwayId> out;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    auto w = net.airway_between(nodes[i], nodes[i + 1]);
    if (!w) throw LookupError("route hop has no airway");
    out.push_back(*w);
  }
  return out;
}

double route_length(const AirwayNetwork& net, const std::vector<NodeId>& nodes) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    len += (net.node(nodes[i]).position - net.node(nodes[i + 1]).position).norm();
  }
  return len;
}

}  // namespace skylane
