#include "skylane/world/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "skylane/errors.hpp"

namespace skylane {
namespace {

Vec3 vec3_from(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(std::string(what) + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

SubsystemMode mode_from(const std::string& s) {
  if (s == "builtin") return SubsystemMode::kBuiltin;
  if (s == "external") return SubsystemMode::kExternal;
  throw ValidationError("subsystems: mode must be 'builtin' or 'external'");
}

const char* mode_name(SubsystemMode m) { return m == SubsystemMode::kBuiltin ? "builtin" : "external"; }

AvoidanceConfig avoidance_from_json(const nlohmann::json& j, const LidarConfig& lidar) {
  AvoidanceConfig a;
  a.histogram = vfh_defaults(lidar.max_range);
  if (j.is_string()) {
    if (j != "vfh") throw ValidationError("fleet: unknown avoidance method " + j.dump());
    return a;
  }
  if (j.value("method", std::string("vfh")) != "vfh") throw ValidationError("fleet: unknown avoidance method");
  auto& h = a.histogram;
  h.sector_width_deg = j.value("sector_width", h.sector_width_deg);
  h.b = j.value("b", h.b);
  h.a = j.value("a", 2.0 * lidar.max_range * h.b);
  h.threshold = j.value("threshold", 0.3 * h.a);
  h.smoothing = j.value("smoothing", h.smoothing);
  h.band_height = j.value("band_height", h.band_height);
  a.s_max = j.value("s_max", a.s_max);
  a.speed.cruise = j.value("cruise", a.speed.cruise);
  a.speed.density_max = j.value("density_max", h.threshold);
  a.speed.min_fraction = j.value("min_fraction", a.speed.min_fraction);
  h.sectors();  // validates the width
  if (a.s_max < 1) throw ValidationError("fleet: s_max must be >= 1");
  return a;
}

nlohmann::json avoidance_to_json(const AvoidanceConfig& a) {
  const auto& h = a.histogram;
  return {{"method", "vfh"},         {"sector_width", h.sector_width_deg}, {"a", h.a},
          {"b", h.b},                {"threshold", h.threshold},           {"smoothing", h.smoothing},
          {"band_height", h.band_height}, {"s_max", a.s_max},             {"cruise", a.speed.cruise},
          {"density_max", a.speed.density_max}, {"min_fraction", a.speed.min_fraction}};
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("scenario: expected a JSON object");
  try {
    Scenario s;
    for (const char* key : {"datum", "map", "network", "fleet", "demands", "seed"}) {
      if (!j.contains(key)) throw ValidationError(std::string("scenario: missing key '") + key + "'");
    }
    const auto& d = j["datum"];
    s.datum = {d.at("lat").get<double>(), d.at("lon").get<double>(), d.value("alt", 0.0)};

    const auto& map = j["map"];
    if (map.is_string()) {
      s.map_name = map.get<std::string>();
    } else {
      s.map_name = map.value("name", std::string());
      for (const auto& o : map.value("obstacles", nlohmann::json::array())) s.obstacles.push_back(obstacle_from_json(o));
      for (const auto& z : map.value("no_fly_zones", nlohmann::json::array())) s.no_fly_zones.push_back(zone_from_json(z));
    }

    const auto& net = j["network"];
    if (net.contains("generate")) {
      const auto& g = net["generate"];
      s.network = generate_grid_network(g.at("rows").get<int>(), g.at("cols").get<int>(), g.at("spacing").get<double>(),
                                        g.at("altitude").get<double>(), g.at("airport_every").get<int>());
    } else {
      s.network = network_from_json(net);
    }

    for (const auto& f : j["fleet"]) {
      FleetEntry e;
      e.id = f.at("id").get<UavId>();
      e.home = f.at("home").get<AirportId>();
      if (f.contains("params")) e.params = params_from_json(f["params"]);
      if (f.contains("gains")) e.gains = gains_from_json(f["gains"]);
      if (f.contains("lidar")) e.lidar = lidar_from_json(f["lidar"]);
      if (f.contains("avoidance") && !f["avoidance"].is_null() && f["avoidance"] != "none") {
        if (!e.lidar) throw ValidationError("fleet: uav " + std::to_string(e.id) + " has avoidance but no lidar");
        e.avoidance = avoidance_from_json(f["avoidance"], *e.lidar);
      }
      s.fleet.push_back(std::move(e));
    }

    for (const auto& dj : j["demands"]) {
      FlightDemand dm;
      dm.id = dj.at("id").get<DemandId>();
      dm.origin = dj.at("origin").get<AirportId>();
      dm.destination = dj.at("destination").get<AirportId>();
      dm.requested_departure = dj.value("departure", Tick{0});
      dm.payload = dj.value("payload", std::string());
      s.demands.push_back(std::move(dm));
    }

    for (const auto& a : j.value("anomalies", nlohmann::json::array())) s.anomalies.push_back(anomaly_from_json(a));
    s.seed = j["seed"].get<std::uint64_t>();

    if (j.contains("clock")) {
      const auto& c = j["clock"];
      s.clock.tick_rate = c.value("tick_rate", s.clock.tick_rate);
      s.clock.substeps = c.value("substeps", s.clock.substeps);
      s.clock.telemetry_every = c.value("telemetry_every", s.clock.telemetry_every);
      s.clock.max_ticks = c.value("max_ticks", s.clock.max_ticks);
    }
    if (j.contains("wind")) s.wind = vec3_from(j["wind"], "wind");
    if (j.contains("policy")) s.policy = policy_from_json(j["policy"]);
    if (j.contains("traffic")) s.traffic = traffic_params_from_json(j["traffic"]);
    if (j.contains("links")) {
      for (const auto& [prefix, link] : j["links"].items()) {
        validate_topic(prefix);
        s.links[prefix] = link_from_json(link);
      }
    }
    if (j.contains("subsystems")) {
      const auto& sub = j["subsystems"];
      s.subsystems.authority = mode_from(sub.value("authority", std::string("builtin")));
      s.subsystems.traffic = mode_from(sub.value("traffic", std::string("builtin")));
      s.subsystems.external_timeout_s = sub.value("timeout_s", s.subsystems.external_timeout_s);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["datum"] = {{"lat", s.datum.lat_deg}, {"lon", s.datum.lon_deg}, {"alt", s.datum.alt_m}};
  nlohmann::json obstacles = nlohmann::json::array(), zones = nlohmann::json::array();
  for (const auto& o : s.obstacles) obstacles.push_back(obstacle_to_json(o));
  for (const auto& z : s.no_fly_zones) zones.push_back(zone_to_json(z));
  j["map"] = {{"name", s.map_name}, {"obstacles", obstacles}, {"no_fly_zones", zones}};
  j["network"] = network_to_json(s.network);
  nlohmann::json fleet = nlohmann::json::array();
  for (const auto& f : s.fleet) {
    nlohmann::json e = {{"id", f.id}, {"home", f.home}, {"params", params_to_json(f.params)}};
    const auto& g = f.gains;
    e["gains"] = {{"pos_p", g.pos_p}, {"vel_p", g.vel_p}, {"att_p", g.att_p},
                  {"rate_p", g.rate_p}, {"v_max", g.v_max}, {"tilt_max_deg", g.tilt_max_deg}};
    if (f.lidar) e["lidar"] = lidar_to_json(*f.lidar);
    if (f.avoidance) e["avoidance"] = avoidance_to_json(*f.avoidance);
    fleet.push_back(std::move(e));
  }
  j["fleet"] = fleet;
  nlohmann::json demands = nlohmann::json::array();
  for (const auto& d : s.demands)
    demands.push_back({{"id", d.id}, {"origin", d.origin}, {"destination", d.destination},
                       {"departure", d.requested_departure}, {"payload", d.payload}});
  j["demands"] = demands;
  nlohmann::json anomalies = nlohmann::json::array();
  for (const auto& a : s.anomalies) anomalies.push_back(anomaly_to_json(a));
  j["anomalies"] = anomalies;
  j["seed"] = s.seed;
  j["clock"] = {{"tick_rate", s.clock.tick_rate}, {"substeps", s.clock.substeps},
                {"telemetry_every", s.clock.telemetry_every}, {"max_ticks", s.clock.max_ticks}};
  j["wind"] = {s.wind.x(), s.wind.y(), s.wind.z()};
  j["policy"] = policy_to_json(s.policy);
  j["traffic"] = traffic_params_to_json(s.traffic);
  nlohmann::json links = nlohmann::json::object();
  for (const auto& [prefix, l] : s.links) links[prefix] = link_to_json(l);
  j["links"] = links;
  j["subsystems"] = {{"authority", mode_name(s.subsystems.authority)},
                     {"traffic", mode_name(s.subsystems.traffic)},
                     {"timeout_s", s.subsystems.external_timeout_s}};
  return j;
}

std::vector<Violation> validate_scenario(const Scenario& s) {
  std::vector<Violation> out = validate_network(s.network);
  const auto& net = s.network;
  auto add = [&](std::string rule, std::vector<std::uint32_t> ids, std::string msg) {
    out.push_back({std::move(rule), std::move(ids), std::move(msg)});
  };

  if (!(std::abs(s.datum.lat_deg) <= 90.0 && std::abs(s.datum.lon_deg) <= 180.0))
    add("datum", {}, "datum latitude/longitude out of range");
  if (s.clock.tick_rate <= 0 || s.clock.substeps <= 0) add("clock", {}, "tick_rate and substeps must be positive");
  else if (1.0 / (s.clock.tick_rate * s.clock.substeps) > 0.01) add("clock", {}, "physics step exceeds 0.01 s");
  if (s.clock.telemetry_every == 0) add("clock", {}, "telemetry_every must be >= 1");
  if (!s.wind.allFinite()) add("wind", {}, "wind must be finite");

  std::set<UavId> uavs;
  for (const auto& f : s.fleet) {
    if (!uavs.insert(f.id).second) add("fleet-duplicate-uav", {f.id}, "uav id appears twice");
    if (!net.airports.count(f.home)) add("fleet-home", {f.id, f.home}, "home airport does not exist");
    try {
      validate_params(f.params);
    } catch (const ValidationError& e) {
      add("fleet-params", {f.id}, e.what());
    }
  }

  std::set<DemandId> demand_ids;
  for (const auto& d : s.demands) {
    if (!demand_ids.insert(d.id).second) add("demand-duplicate", {d.id}, "demand id appears twice");
    if (!net.airports.count(d.origin)) add("demand-airport", {d.id, d.origin}, "origin airport does not exist");
    if (!net.airports.count(d.destination))
      add("demand-airport", {d.id, d.destination}, "destination airport does not exist");
    if (d.origin == d.destination) add("demand-same-airport", {d.id}, "origin equals destination");
  }

  std::set<std::uint32_t> obstacle_ids;
  for (const auto& o : s.obstacles)
    if (!obstacle_ids.insert(o.id).second) add("obstacle-duplicate", {o.id}, "obstacle id appears twice");

  std::set<std::string> anomaly_ids;
  for (const auto& a : s.anomalies) {
    if (!anomaly_ids.insert(a.id).second) add("anomaly-duplicate", {}, "anomaly id '" + a.id + "' appears twice");
    switch (a.kind) {
      case AnomalyKind::kCloseAirway:
        for (AirwayId w : a.airways)
          if (!net.airways.count(w)) add("anomaly-target", {w}, "anomaly '" + a.id + "' names an unknown airway");
        break;
      case AnomalyKind::kGroundStop:
        if (!net.airports.count(a.airport))
          add("anomaly-target", {a.airport}, "anomaly '" + a.id + "' names an unknown airport");
        break;
      case AnomalyKind::kMotorFailure:
      case AnomalyKind::kPropellerBreakage:
        if (!uavs.count(a.uav)) add("anomaly-target", {a.uav}, "anomaly '" + a.id + "' names an unknown uav");
        break;
      default:
        break;
    }
  }
  return out;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("scenario '" + path + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace skylane
