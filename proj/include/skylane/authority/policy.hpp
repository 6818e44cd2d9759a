#pragma once

#include <json.hpp>

#include "skylane/world/types.hpp"

namespace skylane {

/// Minimal approval rules of the built-in authority.
struct ApprovalPolicy {
  double max_airway_occupancy_fraction = 1.0;  // (0, 1]
  Tick departure_separation = 60;              // ticks between takeoffs per pad
  bool nfz_check = true;
  double corridor_tolerance = 2.0;  // m beyond corridor radius before a deviation event
  Tick defer_retry = 30;            // ticks until a congestion-deferred plan may retry
  Tick stats_every = 30;            // ticks between stats/traffic publications
};

void validate_policy(const ApprovalPolicy& p);
ApprovalPolicy policy_from_json(const nlohmann::json& j, ApprovalPolicy base = {});
nlohmann::json policy_to_json(const ApprovalPolicy& p);

/// Approves everything at the requested tick: no NFZ check, no occupancy or
/// pad limits.
ApprovalPolicy permissive_policy();

}  // namespace skylane
