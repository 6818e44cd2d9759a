#include <map>

#include "skylane/anomaly/anomaly.hpp"
#include "skylane/errors.hpp"

namespace skylane {
namespace {

const std::map<std::string, AnomalyKind>& kind_table() {
  static const std::map<std::string, AnomalyKind> table = {
      {"close_airway", AnomalyKind::kCloseAirway},   {"activate_nfz", AnomalyKind::kActivateNfz},
      {"ground_stop", AnomalyKind::kGroundStop},     {"wind_gust", AnomalyKind::kWindGust},
      {"spawn_obstacle", AnomalyKind::kSpawnObstacle}, {"fog_lidar", AnomalyKind::kFogLidar},
      {"motor_failure", AnomalyKind::kMotorFailure}, {"propeller_breakage", AnomalyKind::kPropellerBreakage},
      {"set_link", AnomalyKind::kSetLink},
  };
  return table;
}

Vec3 vec3_param(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw ValidationError(std::string("anomaly: ") + key + " must be [x, y, z]");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

const char* category_name(AnomalyCategory c) {
  switch (c) {
    case AnomalyCategory::kControl: return "control";
    case AnomalyCategory::kEnvironment: return "environment";
    case AnomalyCategory::kUav: return "uav";
    case AnomalyCategory::kCommunication: return "communication";
  }
  return "unknown";
}

const char* kind_name(AnomalyKind k) {
  for (const auto& [name, kind] : kind_table())
    if (kind == k) return name.c_str();
  return "unknown";
}

AnomalyCategory category_of(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::kCloseAirway:
    case AnomalyKind::kActivateNfz:
    case AnomalyKind::kGroundStop: return AnomalyCategory::kControl;
    case AnomalyKind::kWindGust:
    case AnomalyKind::kSpawnObstacle:
    case AnomalyKind::kFogLidar: return AnomalyCategory::kEnvironment;
    case AnomalyKind::kMotorFailure:
    case AnomalyKind::kPropellerBreakage: return AnomalyCategory::kUav;
    case AnomalyKind::kSetLink: return AnomalyCategory::kCommunication;
  }
  return AnomalyCategory::kEnvironment;
}

Anomaly anomaly_from_json(const nlohmann::json& j, bool require_onset) {
  if (!j.is_object()) throw ValidationError("anomaly: expected an object");
  try {
    Anomaly a;
    const auto& id = j.at("id");
    a.id = id.is_string() ? id.get<std::string>() : id.dump();
    const std::string kind = j.at("kind").get<std::string>();
    auto it = kind_table().find(kind);
    if (it == kind_table().end()) throw ValidationError("anomaly: unknown kind '" + kind + "'");
    a.kind = it->second;
    if (j.contains("category") && j["category"].get<std::string>() != category_name(a.category()))
      throw ValidationError("anomaly: kind '" + kind + "' is not in category '" + j["category"].get<std::string>() + "'");
    if (require_onset || j.contains("onset")) a.onset = j.at("onset").get<Tick>();
    if (j.contains("duration") && !j["duration"].is_null()) {
      if (j["duration"].is_string()) {
        if (j["duration"] != "permanent") throw ValidationError("anomaly: duration must be ticks or 'permanent'");
      } else {
        a.duration = j["duration"].get<Tick>();
        if (*a.duration == 0) throw ValidationError("anomaly: duration must be positive");
      }
    }
    const nlohmann::json params = j.value("params", nlohmann::json::object());
    switch (a.kind) {
      case AnomalyKind::kCloseAirway:
        if (params.contains("airways")) {
          a.airways = params["airways"].get<std::vector<AirwayId>>();
        } else {
          a.airways.push_back(params.at("airway").get<AirwayId>());
        }
        if (a.airways.empty()) throw ValidationError("anomaly: close_airway needs at least one airway");
        break;
      case AnomalyKind::kActivateNfz:
        a.zone = zone_from_json(params.at("zone"));
        break;
      case AnomalyKind::kGroundStop:
        a.airport = params.at("airport").get<AirportId>();
        break;
      case AnomalyKind::kWindGust:
        a.wind = vec3_param(params, "vector");
        if (!a.wind.allFinite()) throw ValidationError("anomaly: wind must be finite");
        break;
      case AnomalyKind::kSpawnObstacle:
        a.obstacle = obstacle_from_json(params.at("obstacle"));
        break;
      case AnomalyKind::kFogLidar:
        a.dropout_prob = params.value("dropout_prob", 0.0);
        a.range_scale = params.value("range_scale", 1.0);
        if (!(a.dropout_prob >= 0.0 && a.dropout_prob <= 1.0)) throw ValidationError("anomaly: dropout_prob in [0, 1]");
        if (!(a.range_scale > 0.0 && a.range_scale <= 1.0)) throw ValidationError("anomaly: range_scale in (0, 1]");
        break;
      case AnomalyKind::kMotorFailure:
      case AnomalyKind::kPropellerBreakage:
        a.uav = params.at("uav").get<UavId>();
        a.motor = params.at("motor").get<int>();
        if (a.motor < 0 || a.motor > 3) throw ValidationError("anomaly: motor index in 0..3");
        a.residual = a.kind == AnomalyKind::kMotorFailure ? params.at("residual").get<double>() : 0.0;
        if (!(a.residual >= 0.0 && a.residual < 1.0)) throw ValidationError("anomaly: residual efficiency in [0, 1)");
        break;
      case AnomalyKind::kSetLink:
        a.prefix = params.at("prefix").get<std::string>();
        validate_topic(a.prefix);
        a.link = link_from_json(params.at("link"));
        break;
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("anomaly: ") + e.what());
  } catch (const LookupError& e) {
    throw ValidationError(e.what());
  }
}

nlohmann::json anomaly_to_json(const Anomaly& a) {
  nlohmann::json params = nlohmann::json::object();
  switch (a.kind) {
    case AnomalyKind::kCloseAirway: params["airways"] = a.airways; break;
    case AnomalyKind::kActivateNfz: params["zone"] = zone_to_json(*a.zone); break;
    case AnomalyKind::kGroundStop: params["airport"] = a.airport; break;
    case AnomalyKind::kWindGust: params["vector"] = {a.wind.x(), a.wind.y(), a.wind.z()}; break;
    case AnomalyKind::kSpawnObstacle: params["obstacle"] = obstacle_to_json(*a.obstacle); break;
    case AnomalyKind::kFogLidar:
      params["dropout_prob"] = a.dropout_prob;
      params["range_scale"] = a.range_scale;
      break;
    case AnomalyKind::kMotorFailure:
    case AnomalyKind::kPropellerBreakage:
      params["uav"] = a.uav;
      params["motor"] = a.motor;
      if (a.kind == AnomalyKind::kMotorFailure) params["residual"] = a.residual;
      break;
    case AnomalyKind::kSetLink:
      params["prefix"] = a.prefix;
      params["link"] = link_to_json(a.link);
      break;
  }
  nlohmann::json j = {{"id", a.id},
                      {"category", category_name(a.category())},
                      {"kind", kind_name(a.kind)},
                      {"onset", a.onset},
                      {"params", params}};
  j["duration"] = a.duration ? nlohmann::json(*a.duration) : nlohmann::json("permanent");
  return j;
}

nlohmann::json log_entry_to_json(const AnomalyLogEntry& e) {
  nlohmann::json j = {{"anomaly", e.anomaly_id},
                      {"kind", kind_name(e.kind)},
                      {"applied_tick", e.applied_tick},
                      {"affected", e.affected},
                      {"live", e.live}};
  j["reverted_tick"] = e.reverted_tick ? nlohmann::json(*e.reverted_tick) : nlohmann::json(nullptr);
  return j;
}

}  // namespace skylane
