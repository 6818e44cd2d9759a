#include <algorithm>

#include "skylane/anomaly/anomaly.hpp"
#include "skylane/errors.hpp"

namespace skylane {

nlohmann::json rejection_to_json(const AnomalyRejection& r) {
  return {{"anomaly", r.anomaly_id}, {"tick", r.tick}, {"reason", r.reason}, {"live", r.live}};
}

AnomalyManager::AnomalyManager(std::vector<Anomaly> scheduled, std::set<UavId> fleet, const AirwayNetwork& network,
                               std::set<std::uint32_t> zone_ids, Vec3 wind, std::map<std::string, LinkModel> links)
    : scheduled_(std::move(scheduled)),
      fleet_(std::move(fleet)),
      net_(&network),
      zone_ids_(std::move(zone_ids)),
      base_wind_(wind),
      base_links_(std::move(links)) {
  std::stable_sort(scheduled_.begin(), scheduled_.end(),
                   [](const Anomaly& a, const Anomaly& b) { return a.onset < b.onset; });
}

void AnomalyManager::attach(MessageBus& bus) {
  bus_ = &bus;
  sub_inject_ = bus.subscribe("anomaly/inject");
}

void AnomalyManager::publish(const std::string& topic, const nlohmann::json& payload, Tick now) {
  events_.push_back(payload);
  if (bus_) bus_->publish(topic, payload, now);
}

std::vector<nlohmann::json> AnomalyManager::take_events() {
  std::vector<nlohmann::json> out;
  out.swap(events_);
  return out;
}

std::optional<std::string> AnomalyManager::check_target(const Anomaly& a, bool live) const {
  if (used_ids_.count(a.id)) return "duplicate anomaly id";
  switch (a.kind) {
    case AnomalyKind::kCloseAirway:
      if (a.airways.empty()) return "unknown target";
      for (AirwayId w : a.airways)
        if (!net_->airways.count(w)) return "unknown target";
      break;
    case AnomalyKind::kActivateNfz:
      if (!a.zone) return "unknown target";
      break;
    case AnomalyKind::kGroundStop:
      if (!net_->airports.count(a.airport)) return "unknown target";
      break;
    case AnomalyKind::kSpawnObstacle:
      if (!a.obstacle) return "unknown target";
      break;
    case AnomalyKind::kMotorFailure:
    case AnomalyKind::kPropellerBreakage:
      if (!fleet_.count(a.uav)) return "unknown target";
      if (live && uav_active_ && !uav_active_(a.uav)) return "unknown target";
      break;
    case AnomalyKind::kSetLink:
      if (!a.prefix.empty()) {
        try {
          validate_topic(a.prefix);
        } catch (const ValidationError&) {
          return "unknown target";
        }
      }
      break;
    case AnomalyKind::kWindGust:
    case AnomalyKind::kFogLidar: break;
  }
  return std::nullopt;
}

void AnomalyManager::reject(const std::string& id, Tick now, const std::string& reason, bool live) {
  rejections_.push_back({id, now, reason, live});
  nlohmann::json j = rejection_to_json(rejections_.back());
  j["type"] = "anomaly_rejected";
  publish("anomaly/rejected", j, now);
}

bool AnomalyManager::apply(Anomaly a, Tick now, bool live) {
  if (auto why = check_target(a, live)) {
    reject(a.id, now, *why, live);
    return false;
  }
  a.onset = now;
  used_ids_.insert(a.id);
  AnomalyLogEntry entry;
  entry.anomaly_id = a.id;
  entry.kind = a.kind;
  entry.applied_tick = now;
  entry.live = live;

  auto order = [&](const char* name) {
    nlohmann::json o = {{"order", name}, {"source", a.id}};
    return o;
  };
  auto send = [&](const nlohmann::json& o) -> std::vector<PlanId> {
    if (airspace_) return airspace_(o, now);
    if (bus_) bus_->publish("control/order", o, now);
    return {};
  };
  switch (a.kind) {
    case AnomalyKind::kCloseAirway: {
      auto o = order("close_airway");
      o["airways"] = a.airways;
      entry.affected = send(o);
      break;
    }
    case AnomalyKind::kActivateNfz: {
      auto o = order("activate_nfz");
      o["zone"] = zone_to_json(*a.zone);
      entry.affected = send(o);
      zone_ids_.insert(a.zone->id);
      break;
    }
    case AnomalyKind::kGroundStop: {
      auto o = order("ground_stop");
      o["airport"] = a.airport;
      entry.affected = send(o);
      break;
    }
    case AnomalyKind::kMotorFailure:
    case AnomalyKind::kPropellerBreakage: entry.affected = {a.uav}; break;
    case AnomalyKind::kSetLink: link_prefixes_.insert(a.prefix); break;
    default: break;
  }
  log_.push_back(entry);
  active_.push_back({a, log_.size() - 1});
  refresh();
  nlohmann::json j = log_entry_to_json(entry);
  j["type"] = "anomaly_applied";
  j["anomaly_spec"] = anomaly_to_json(a);
  publish("anomaly/applied", j, now);
  return true;
}

void AnomalyManager::revert(std::size_t index, Tick now) {
  const Active gone = active_[index];
  active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(index));
  const Anomaly& a = gone.anomaly;
  auto still = [&](auto pred) {
    return std::any_of(active_.begin(), active_.end(), [&](const Active& x) { return pred(x.anomaly); });
  };
  auto send = [&](const nlohmann::json& o) {
    if (airspace_) {
      airspace_(o, now);
    } else if (bus_) {
      bus_->publish("control/order", o, now);
    }
  };
  switch (a.kind) {
    case AnomalyKind::kCloseAirway: {
      std::vector<AirwayId> reopen;
      for (AirwayId w : a.airways) {
        const bool held = still([&](const Anomaly& x) {
          return x.kind == AnomalyKind::kCloseAirway &&
                 std::find(x.airways.begin(), x.airways.end(), w) != x.airways.end();
        });
        if (!held) reopen.push_back(w);
      }
      if (!reopen.empty()) send({{"order", "reopen_airway"}, {"airways", reopen}, {"source", a.id}});
      break;
    }
    case AnomalyKind::kActivateNfz:
      send({{"order", "deactivate_nfz"}, {"zone_id", a.zone->id}, {"source", a.id}});
      break;
    case AnomalyKind::kGroundStop:
      if (!still([&](const Anomaly& x) { return x.kind == AnomalyKind::kGroundStop && x.airport == a.airport; }))
        send({{"order", "lift_ground_stop"}, {"airport", a.airport}, {"source", a.id}});
      break;
    default: break;
  }
  log_[gone.log_index].reverted_tick = now;
  refresh();
  nlohmann::json j = log_entry_to_json(log_[gone.log_index]);
  j["type"] = "anomaly_reverted";
  publish("anomaly/reverted", j, now);
}

void AnomalyManager::refresh() {
  obstacles_.clear();
  for (const Active& x : active_)
    if (x.anomaly.kind == AnomalyKind::kSpawnObstacle) obstacles_.push_back(*x.anomaly.obstacle);
  if (!bus_) return;
  for (const std::string& prefix : link_prefixes_) {
    const Anomaly* latest = nullptr;
    for (const Active& x : active_)
      if (x.anomaly.kind == AnomalyKind::kSetLink && x.anomaly.prefix == prefix) latest = &x.anomaly;
    if (latest) {
      bus_->set_link(prefix, latest->link);
    } else if (auto it = base_links_.find(prefix); it != base_links_.end()) {
      bus_->set_link(prefix, it->second);
    } else if (prefix.empty()) {
      bus_->set_link(prefix, LinkModel{});
    } else {
      bus_->clear_link(prefix);
    }
  }
}

void AnomalyManager::step(Tick now) {
  for (std::size_t i = 0; i < active_.size();) {
    const auto r = active_[i].anomaly.revert_tick();
    if (r && *r <= now) {
      revert(i, now);
    } else {
      ++i;
    }
  }
  if (bus_) {
    for (const Envelope& e : bus_->drain(sub_inject_)) live_inject(e.payload, now);
  }
  while (next_scheduled_ < scheduled_.size() && scheduled_[next_scheduled_].onset <= now) {
    apply(scheduled_[next_scheduled_], now, false);
    ++next_scheduled_;
  }
}

std::optional<AnomalyLogEntry> AnomalyManager::live_inject(const nlohmann::json& request, Tick now) {
  nlohmann::json req = request;
  if (req.is_object() && !req.contains("id")) req["id"] = "live-" + std::to_string(now) + "-" + std::to_string(log_.size() + rejections_.size());
  Anomaly a;
  try {
    a = anomaly_from_json(req, false);
  } catch (const std::exception& e) {
    std::string id = req.is_object() && req.contains("id") && req["id"].is_string() ? req["id"].get<std::string>() : "";
    reject(id, now, e.what(), true);
    return std::nullopt;
  }
  if (!apply(a, now, true)) return std::nullopt;
  return log_.back();
}

Vec3 AnomalyManager::wind() const {
  Vec3 w = base_wind_;
  for (const Active& x : active_)
    if (x.anomaly.kind == AnomalyKind::kWindGust) w += x.anomaly.wind;
  return w;
}

LidarEffects AnomalyManager::lidar_effects() const {
  LidarEffects fx;
  double keep = 1.0;
  for (const Active& x : active_) {
    if (x.anomaly.kind != AnomalyKind::kFogLidar) continue;
    keep *= 1.0 - x.anomaly.dropout_prob;
    fx.range_scale *= x.anomaly.range_scale;
  }
  fx.dropout_prob = 1.0 - keep;
  return fx;
}

MotorVector AnomalyManager::health(UavId uav) const {
  MotorVector h = MotorVector::Ones();
  for (const Active& x : active_) {
    const Anomaly& a = x.anomaly;
    if (a.uav != uav) continue;
    if (a.kind == AnomalyKind::kMotorFailure) h[a.motor] = std::min(h[a.motor], a.residual);
    if (a.kind == AnomalyKind::kPropellerBreakage) h[a.motor] = 0.0;
  }
  return h;
}

}  // namespace skylane
