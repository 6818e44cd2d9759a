#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylane/airway/network.hpp"
#include "skylane/anomaly/anomaly.hpp"
#include "skylane/authority/policy.hpp"
#include "skylane/bus/bus.hpp"
#include "skylane/dynamics/params.hpp"
#include "skylane/sensing/lidar.hpp"
#include "skylane/sensing/vfh.hpp"
#include "skylane/traffic/params.hpp"
#include "skylane/world/geo.hpp"
#include "skylane/world/geometry.hpp"

namespace skylane {

using DemandId = std::uint32_t;

struct FlightDemand {
  DemandId id = 0;
  AirportId origin = 0;
  AirportId destination = 0;
  Tick requested_departure = 0;
  std::string payload;
};

struct AvoidanceConfig {
  HistogramParams histogram;
  int s_max = 8;
  SpeedPolicy speed;
};

struct FleetEntry {
  UavId id = 0;
  AirportId home = 0;
  UavParams params;
  ControllerGains gains;
  std::optional<LidarConfig> lidar;
  std::optional<AvoidanceConfig> avoidance;  // VFH when set (requires lidar)
};

struct ClockConfig {
  int tick_rate = 30;
  int substeps = 8;
  Tick telemetry_every = 1;  // ticks between telemetry records
  Tick max_ticks = 54000;    // hard stop when demands never terminate
};

enum class SubsystemMode { kBuiltin, kExternal };

struct SubsystemConfig {
  SubsystemMode authority = SubsystemMode::kBuiltin;
  SubsystemMode traffic = SubsystemMode::kBuiltin;
  double external_timeout_s = 5.0;
};

struct Scenario {
  GeodeticPoint datum;
  std::string map_name;
  AirwayNetwork network;
  std::vector<Obstacle> obstacles;
  std::vector<NoFlyZone> no_fly_zones;
  std::vector<FleetEntry> fleet;
  std::vector<FlightDemand> demands;
  std::vector<Anomaly> anomalies;
  std::uint64_t seed = 0;
  ClockConfig clock;
  Vec3 wind = Vec3::Zero();
  ApprovalPolicy policy;
  TrafficParams traffic;
  std::map<std::string, LinkModel> links;
  SubsystemConfig subsystems;
};

/// Every violated invariant of a parsed scenario; empty when it is runnable.
std::vector<Violation> validate_scenario(const Scenario& s);

/// Parses the scenario document. Throws ValidationError on schema errors
/// (missing keys, wrong types); semantic checks are left to validate_scenario.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
/// Reads and parses a file; throws ValidationError if unreadable.
Scenario load_scenario(const std::string& path);

}  // namespace skylane
