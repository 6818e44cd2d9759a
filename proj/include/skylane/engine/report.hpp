#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylane/anomaly/anomaly.hpp"
#include "skylane/authority/authority.hpp"
#include "skylane/engine/collision.hpp"

namespace skylane {

struct MissionOutcome {
  PlanId plan = 0;
  DemandId demand = 0;
  UavId uav = 0;
  std::string state = "draft";
  std::string reason;
  std::optional<Tick> departed;
  std::optional<Tick> finished;
  std::size_t replans = 0;
};

/// Deterministic summary of a run. Wall-clock figures live in PerfReport.
struct RunReport {
  Tick ticks = 0;
  std::string stop_reason;  // all_terminal | until | max_ticks | empty | error
  bool all_terminal = false;
  TrafficStats stats;
  std::vector<CollisionEvent> collisions;
  std::vector<MissionOutcome> missions;
  std::vector<AnomalyLogEntry> anomalies;
  std::vector<AnomalyRejection> anomaly_rejections;
  std::size_t replans = 0;
  std::size_t peak_active = 0;
  double min_separation = -1.0;  // closest approach of any two airborne vehicles; -1 if never two
  std::map<std::string, std::string> logs;
};

nlohmann::json report_to_json(const RunReport& r);

struct PerfReport {
  double wall_seconds = 0.0;
  Tick ticks = 0;
  double ticks_per_second = 0.0;
  std::size_t peak_active = 0;
  /// Throughput over the ticks run with at least `loaded_threshold` vehicles.
  std::size_t loaded_threshold = 0;
  Tick loaded_ticks = 0;
  double loaded_ticks_per_second = 0.0;
  int threads = 1;
};

nlohmann::json perf_to_json(const PerfReport& p);

}  // namespace skylane
