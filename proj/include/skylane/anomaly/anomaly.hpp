#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "skylane/airway/network.hpp"
#include "skylane/bus/bus.hpp"
#include "skylane/dynamics/state.hpp"
#include "skylane/sensing/lidar.hpp"
#include "skylane/world/geometry.hpp"
#include "skylane/world/types.hpp"

namespace skylane {

enum class AnomalyCategory { kControl, kEnvironment, kUav, kCommunication };

enum class AnomalyKind {
  kCloseAirway,
  kActivateNfz,
  kGroundStop,
  kWindGust,
  kSpawnObstacle,
  kFogLidar,
  kMotorFailure,
  kPropellerBreakage,
  kSetLink,
};

const char* category_name(AnomalyCategory c);
const char* kind_name(AnomalyKind k);
AnomalyCategory category_of(AnomalyKind k);

/// A typed fault. Only the fields of its kind are meaningful.
struct Anomaly {
  std::string id;
  AnomalyKind kind = AnomalyKind::kWindGust;
  Tick onset = 0;
  std::optional<Tick> duration;  // nullopt = permanent

  std::vector<AirwayId> airways;   // close_airway
  std::optional<NoFlyZone> zone;   // activate_nfz
  AirportId airport = 0;           // ground_stop
  Vec3 wind = Vec3::Zero();        // wind_gust
  std::optional<Obstacle> obstacle;  // spawn_obstacle
  double dropout_prob = 0.0;       // fog_lidar
  double range_scale = 1.0;        // fog_lidar
  UavId uav = 0;                   // motor_failure, propeller_breakage
  int motor = 0;
  double residual = 0.0;
  std::string prefix;              // set_link
  LinkModel link;

  AnomalyCategory category() const { return category_of(kind); }
  std::optional<Tick> revert_tick() const {
    if (!duration) return std::nullopt;
    return onset + *duration;
  }
};

/// Parses {id, category, kind, onset, duration, params}. `onset` may be
/// omitted when `require_onset` is false (live injection). Throws
/// ValidationError on schema violations, including a category that does not
/// own the kind.
Anomaly anomaly_from_json(const nlohmann::json& j, bool require_onset = true);
nlohmann::json anomaly_to_json(const Anomaly& a);

struct AnomalyLogEntry {
  std::string anomaly_id;
  AnomalyKind kind = AnomalyKind::kWindGust;
  Tick applied_tick = 0;
  std::optional<Tick> reverted_tick;
  std::vector<std::uint32_t> affected;
  bool live = false;
};

nlohmann::json log_entry_to_json(const AnomalyLogEntry& e);

struct AnomalyRejection {
  std::string anomaly_id;
  Tick tick = 0;
  std::string reason;
  bool live = false;
};

nlohmann::json rejection_to_json(const AnomalyRejection& r);

/// Airspace order produced by a control anomaly; returns affected plan ids.
using AirspaceHook = std::function<std::vector<PlanId>(const nlohmann::json& order, Tick now)>;

/// Applies scheduled and live anomalies and keeps the resulting world
/// effects. Effects are recomputed from the set of active anomalies, so
/// reverting one restores exactly what it changed.
class AnomalyManager {
 public:
  /// `fleet` and `network` bound the valid targets; `wind` and `links` are
  /// the baseline values restored on revert.
  AnomalyManager(std::vector<Anomaly> scheduled, std::set<UavId> fleet, const AirwayNetwork& network,
                 std::set<std::uint32_t> zone_ids, Vec3 wind, std::map<std::string, LinkModel> links);

  void set_airspace_hook(AirspaceHook hook) { airspace_ = std::move(hook); }
  /// When set, live vehicle anomalies also require the target to be airborne.
  void set_uav_active(std::function<bool(UavId)> fn) { uav_active_ = std::move(fn); }
  /// Subscribes to anomaly/inject and takes over link overrides.
  void attach(MessageBus& bus);

  /// One anomaly phase: queued live requests, scheduled onsets, reverts.
  void step(Tick now);
  /// Validates and applies immediately with onset = now. Returns the log
  /// entry, or nullopt after recording a rejection.
  std::optional<AnomalyLogEntry> live_inject(const nlohmann::json& request, Tick now);

  Vec3 wind() const;
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  LidarEffects lidar_effects() const;
  MotorVector health(UavId uav) const;
  const std::vector<AnomalyLogEntry>& log() const { return log_; }
  const std::vector<AnomalyRejection>& rejections() const { return rejections_; }
  /// Log entries and rejections produced since the last call.
  std::vector<nlohmann::json> take_events();
  std::size_t active_count() const { return active_.size(); }

 private:
  struct Active {
    Anomaly anomaly;
    std::size_t log_index;
  };
  std::optional<std::string> check_target(const Anomaly& a, bool live) const;
  bool apply(Anomaly a, Tick now, bool live);
  void revert(std::size_t index, Tick now);
  void reject(const std::string& id, Tick now, const std::string& reason, bool live);
  void refresh();
  void publish(const std::string& topic, const nlohmann::json& payload, Tick now);

  std::vector<Anomaly> scheduled_;
  std::size_t next_scheduled_ = 0;
  std::set<UavId> fleet_;
  const AirwayNetwork* net_;
  std::set<std::uint32_t> zone_ids_;
  Vec3 base_wind_;
  std::map<std::string, LinkModel> base_links_;
  AirspaceHook airspace_;
  std::function<bool(UavId)> uav_active_;
  MessageBus* bus_ = nullptr;
  SubscriptionId sub_inject_ = 0;

  std::vector<Active> active_;
  std::vector<AnomalyLogEntry> log_;
  std::vector<AnomalyRejection> rejections_;
  std::vector<nlohmann::json> events_;
  std::vector<Obstacle> obstacles_;
  std::set<std::string> link_prefixes_;
  std::set<std::string> used_ids_;
};

}  // namespace skylane
