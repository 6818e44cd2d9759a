#pragma once

#include <chrono>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "skylane/anomaly/anomaly.hpp"
#include "skylane/authority/authority.hpp"
#include "skylane/bus/bus.hpp"
#include "skylane/engine/collision.hpp"
#include "skylane/engine/report.hpp"
#include "skylane/engine/worker_pool.hpp"
#include "skylane/traffic/traffic.hpp"
#include "skylane/world/clock.hpp"
#include "skylane/world/scenario.hpp"

namespace skylane {

enum class Role { kAuthority, kTraffic };
const char* role_name(Role r);

/// Topics a role consumes; the bridge forwards them to an external peer.
std::vector<std::string> role_inbound(Role r);

/// Messages an external peer asks to publish.
using Outbound = std::vector<std::pair<std::string, nlohmann::json>>;

/// A subsystem living outside the process. exchange() hands it the role's
/// inbound messages for a tick and blocks until it acknowledges; it throws
/// SchedulingError("external timeout") when no acknowledgment arrives.
class ExternalPeer {
 public:
  virtual ~ExternalPeer() = default;
  virtual Outbound exchange(Role role, Tick tick, const std::vector<Envelope>& inbound) = 0;
};

struct EngineOptions {
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
  std::optional<Tick> until;
  std::string out_dir;  // empty: no files
  int threads = 1;
  std::size_t loaded_threshold = 100;
};

/// Live entity view for status queries and the stream.
struct EntityView {
  UavId uav = 0;
  PlanId plan = 0;
  PlanState phase = PlanState::kTakingOff;
  UavState state;
  AirwayId airway = 0;
};

/// The tick-loop orchestrator.
class Engine {
 public:
  /// Throws ValidationError listing every violation when the scenario is not
  /// runnable.
  Engine(Scenario scenario, EngineOptions options = {});
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Replaces the built-in subsystem for `role`. Must precede the first step.
  void attach_external(Role role, ExternalPeer* peer);
  /// Receives {kind: telemetry|event|stats, tick, payload} frames at the end
  /// of each tick.
  void set_frame_sink(std::function<void(const nlohmann::json&)> sink) { sink_ = std::move(sink); }

  /// Runs one tick. Returns false once the run has finished.
  bool step();
  /// Steps to completion, then finalizes.
  RunReport run();
  /// Writes stats/report/perf files and closes logs. Idempotent.
  RunReport finish();

  bool finished() const { return finished_; }
  Tick now() const { return clock_.tick(); }
  MessageBus& bus() { return bus_; }
  const Scenario& scenario() const { return scenario_; }
  const TrafficStats& stats() const { return monitor_.stats(); }
  std::vector<EntityView> entities() const;
  std::size_t active_count() const { return entities_.size(); }
  /// Latest decision and plan/state seen for a plan, as published.
  nlohmann::json plan_record(PlanId id) const;
  const PerfReport& perf() const { return perf_; }
  /// Stops at the next tick boundary with the given reason.
  void request_stop(const std::string& reason);

 private:
  struct Entity {
    UavId uav = 0;
    PlanId plan = 0;
    PlanState phase = PlanState::kTakingOff;
    const FleetEntry* cfg = nullptr;
    UavState state;
    ControlSetpoint setpoint;
    bool commanded = false;
    AirwayId airway = 0;
    LocalPoint origin_pad = LocalPoint::Zero();
    LocalPoint destination_pad = LocalPoint::Zero();
    std::unique_ptr<RandomStream> lidar_rng;
    bool touched_ground = false;
    std::size_t last_cloud = 0;
  };

  void deliver(Tick now);
  void on_plan_state(const nlohmann::json& p, Tick now);
  void run_role(Role role, Tick now);
  void update_entity(Entity& e, const std::vector<Sphere>& others, const std::vector<Obstacle>& obstacles,
                     const Vec3& wind, const LidarEffects& fog);
  void collisions(Tick now);
  void telemetry(Tick now);
  void event(const nlohmann::json& e);
  void frame(const char* kind, Tick tick, const nlohmann::json& payload);
  bool done() const;

  Scenario scenario_;
  EngineOptions options_;
  SimClock clock_;
  MessageBus bus_;
  std::unique_ptr<ControlAuthority> authority_;
  std::unique_ptr<TrafficManager> traffic_;
  AnomalyManager anomalies_;
  FlightMonitor monitor_;
  ExternalPeer* external_[2] = {nullptr, nullptr};
  std::vector<SubscriptionId> external_subs_[2];
  SubscriptionId sub_state_ = 0, sub_cmd_ = 0, sub_decision_ = 0, sub_anomaly_ = 0;
  std::map<UavId, const FleetEntry*> fleet_;
  std::map<UavId, Entity> entities_;
  std::map<PlanId, MissionOutcome> missions_;
  std::map<PlanId, nlohmann::json> decisions_;
  std::map<PlanId, nlohmann::json> plan_states_;
  std::set<std::vector<std::uint32_t>> contact_keys_;
  std::vector<CollisionEvent> collision_log_;
  std::size_t replans_ = 0;
  std::size_t peak_active_ = 0;
  double min_separation_ = -1.0;
  std::unique_ptr<WorkerPool> pool_;
  std::function<void(const nlohmann::json&)> sink_;
  std::ofstream telemetry_log_, event_log_;
  bool started_ = false;
  bool finished_ = false;
  bool finalized_ = false;
  std::string stop_reason_;
  std::optional<std::string> stop_request_;
  RunReport report_;
  PerfReport perf_;
  std::chrono::steady_clock::time_point wall_start_;
  double loaded_seconds_ = 0.0;
};

}  // namespace skylane
