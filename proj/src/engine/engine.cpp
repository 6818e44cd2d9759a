#include "skylane/engine/engine.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "skylane/dynamics/controller.hpp"
#include "skylane/dynamics/model.hpp"
#include "skylane/errors.hpp"
#include "skylane/sensing/lidar.hpp"
#include "skylane/sensing/vfh.hpp"

namespace skylane {
namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Scenario checked(Scenario s, const EngineOptions& o) {
  if (o.seed) s.seed = *o.seed;
  const auto violations = validate_scenario(s);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "scenario has " << violations.size() << " violation(s):";
    for (const auto& v : violations) msg << "\n  " << v.rule << ": " << v.message;
    throw ValidationError(msg.str());
  }
  if (o.threads < 1) throw ValidationError("threads must be >= 1");
  return s;
}

std::set<UavId> fleet_ids(const Scenario& s) {
  std::set<UavId> ids;
  for (const auto& f : s.fleet) ids.insert(f.id);
  return ids;
}

std::set<std::uint32_t> zone_ids(const Scenario& s) {
  std::set<std::uint32_t> ids;
  for (const auto& z : s.no_fly_zones) ids.insert(z.id);
  return ids;
}

// Closest pair distance among points, scanning only neighbors within `cutoff`.
double closest_pair(const std::vector<LocalPoint>& pts, double cutoff) {
  double best = -1.0;
  std::map<std::tuple<long, long, long>, std::vector<std::size_t>> grid;
  auto key = [&](const LocalPoint& p) {
    return std::make_tuple(static_cast<long>(std::floor(p.x() / cutoff)), static_cast<long>(std::floor(p.y() / cutoff)),
                           static_cast<long>(std::floor(p.z() / cutoff)));
  };
  for (std::size_t i = 0; i < pts.size(); ++i) grid[key(pts[i])].push_back(i);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto [cx, cy, cz] = key(pts[i]);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({cx + dx, cy + dy, cz + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i) continue;
            const double d = (pts[i] - pts[j]).norm();
            if (best < 0.0 || d < best) best = d;
          }
        }
  }
  return best;
}

}  // namespace

const char* role_name(Role r) { return r == Role::kAuthority ? "authority" : "traffic"; }

std::vector<std::string> role_inbound(Role r) {
  if (r == Role::kAuthority) return {"plan/submit", "control/order", "plan/state", "uav/telemetry/*"};
  return {"plan/decision", "uav/telemetry/*", "airspace/state"};
}

Engine::Engine(Scenario scenario, EngineOptions options)
    : scenario_(checked(std::move(scenario), options)),
      options_(std::move(options)),
      clock_(scenario_.clock.tick_rate, scenario_.clock.substeps),
      bus_(scenario_.seed),
      anomalies_(scenario_.anomalies, fleet_ids(scenario_), scenario_.network, zone_ids(scenario_), scenario_.wind,
                 scenario_.links),
      monitor_(scenario_.network, scenario_.policy.corridor_tolerance) {
  for (const auto& [prefix, link] : scenario_.links) bus_.set_link(prefix, link);
  for (const auto& f : scenario_.fleet) fleet_[f.id] = &f;
  for (const auto& d : scenario_.demands) {
    MissionOutcome m;
    m.plan = d.id;
    m.demand = d.id;
    missions_[d.id] = m;
  }
  pool_ = std::make_unique<WorkerPool>(options_.threads);
  sub_state_ = bus_.subscribe("plan/state");
  sub_cmd_ = bus_.subscribe("uav/cmd/*");
  sub_decision_ = bus_.subscribe("plan/decision");
  anomalies_.attach(bus_);
  anomalies_.set_uav_active([this](UavId id) { return entities_.count(id) > 0; });
}

Engine::~Engine() = default;

void Engine::attach_external(Role role, ExternalPeer* peer) {
  if (started_) throw SchedulingError("external subsystems must attach before the first tick");
  external_[static_cast<int>(role)] = peer;
}

void Engine::request_stop(const std::string& reason) { stop_request_ = reason; }

nlohmann::json Engine::plan_record(PlanId id) const {
  nlohmann::json j = {{"plan", id}};
  auto d = decisions_.find(id);
  j["decision"] = d == decisions_.end() ? nlohmann::json(nullptr) : d->second;
  auto s = plan_states_.find(id);
  j["status"] = s == plan_states_.end() ? nlohmann::json(nullptr) : s->second;
  return j;
}

std::vector<EntityView> Engine::entities() const {
  std::vector<EntityView> out;
  for (const auto& [id, e] : entities_) out.push_back({id, e.plan, e.phase, e.state, e.airway});
  return out;
}

void Engine::event(const nlohmann::json& e) {
  if (event_log_.is_open()) event_log_ << e.dump() << '\n';
  frame("event", clock_.tick(), e);
}

void Engine::frame(const char* kind, Tick tick, const nlohmann::json& payload) {
  if (sink_) sink_({{"kind", kind}, {"tick", tick}, {"payload", payload}});
}

void Engine::on_plan_state(const nlohmann::json& j, Tick now) {
  const FlightPlan p = plan_status_from_json(j);
  plan_states_[p.id] = j;
  auto& m = missions_[p.id];
  m.plan = p.id;
  m.demand = p.demand;
  m.uav = p.uav;
  const std::string state = plan_state_name(p.state);
  if (j.value("event", std::string()) == "replan") {
    ++m.replans;
    ++replans_;
    event({{"type", "replan"}, {"tick", now}, {"plan", p.id}, {"uav", p.uav}, {"route", p.route}});
  }
  if (state != m.state) {
    event({{"type", "transition"}, {"tick", now}, {"plan", p.id}, {"uav", p.uav}, {"from", m.state}, {"to", state},
           {"reason", p.reason}});
    monitor_.record_transition(p, p.state);
    m.state = state;
    m.reason = p.reason;
    if (p.state == PlanState::kTakingOff) m.departed = now;
    if (is_terminal(p.state)) m.finished = now;
  }

  if (p.state == PlanState::kTakingOff && !entities_.count(p.uav)) {
    auto f = fleet_.find(p.uav);
    if (f == fleet_.end()) {
      event({{"type", "spawn_rejected"}, {"tick", now}, {"plan", p.id}, {"uav", p.uav}, {"reason", "unknown uav"}});
      return;
    }
    const auto pads = pad_positions(scenario_.network, p.origin, scenario_.traffic.pad_spacing);
    const std::size_t pad = static_cast<std::size_t>(std::clamp(p.departure_pad, 0, static_cast<int>(pads.size()) - 1));
    Entity e;
    e.uav = p.uav;
    e.plan = p.id;
    e.phase = p.state;
    e.cfg = f->second;
    e.state.position = pads[pad];
    e.state.motor_speed = MotorVector::Constant(e.cfg->params.hover_speed());
    e.setpoint.mode = SetpointMode::kPositionHold;
    e.setpoint.target = e.state.position;
    e.origin_pad = pads[pad];
    const auto dest = pad_positions(scenario_.network, p.destination, scenario_.traffic.pad_spacing);
    e.destination_pad = dest.front();
    e.lidar_rng = std::make_unique<RandomStream>(scenario_.seed, "lidar/" + std::to_string(p.uav));
    entities_.emplace(p.uav, std::move(e));
    event({{"type", "spawn"}, {"tick", now}, {"plan", p.id}, {"uav", p.uav}, {"position", vec_json(pads[pad])}});
    return;
  }
  auto it = entities_.find(p.uav);
  if (it == entities_.end() || it->second.plan != p.id) return;
  it->second.phase = p.state;
  if (p.arrival_pad >= 0) {
    const auto dest = pad_positions(scenario_.network, p.destination, scenario_.traffic.pad_spacing);
    it->second.destination_pad = dest[std::min<std::size_t>(static_cast<std::size_t>(p.arrival_pad), dest.size() - 1)];
  }
  if (is_terminal(p.state)) {
    for (const auto& ev : monitor_.remove(now, p.uav)) (void)ev;
    event({{"type", "reclaim"}, {"tick", now}, {"plan", p.id}, {"uav", p.uav}});
    entities_.erase(it);
  }
}

void Engine::deliver(Tick now) {
  bus_.deliver_due(now);
  for (const Envelope& e : bus_.drain(sub_state_)) {
    try {
      on_plan_state(e.payload, now);
    } catch (const ValidationError&) {
    }
  }
  for (const Envelope& e : bus_.drain(sub_decision_)) {
    if (e.payload.contains("plan")) decisions_[e.payload["plan"].get<PlanId>()] = e.payload;
  }
  for (const Envelope& e : bus_.drain(sub_cmd_)) {
    try {
      const UavCommand c = command_from_json(e.payload);
      auto it = entities_.find(c.uav);
      if (it == entities_.end()) continue;
      it->second.setpoint = c.setpoint;
      it->second.airway = c.airway;
      it->second.commanded = true;
    } catch (const ValidationError&) {
    }
  }
}

void Engine::run_role(Role role, Tick now) {
  const int r = static_cast<int>(role);
  if (ExternalPeer* peer = external_[r]) {
    std::vector<Envelope> inbound;
    for (SubscriptionId s : external_subs_[r]) {
      auto msgs = bus_.drain(s);
      inbound.insert(inbound.end(), std::make_move_iterator(msgs.begin()), std::make_move_iterator(msgs.end()));
    }
    std::stable_sort(inbound.begin(), inbound.end(), [](const Envelope& a, const Envelope& b) {
      return std::tie(a.deliver_tick, a.topic, a.sequence) < std::tie(b.deliver_tick, b.topic, b.sequence);
    });
    for (auto& [topic, payload] : peer->exchange(role, now, inbound)) bus_.publish(topic, payload, now);
    return;
  }
  if (role == Role::kAuthority) {
    authority_->step(now);
  } else {
    traffic_->step(now);
  }
}

void Engine::update_entity(Entity& e, const std::vector<Sphere>& others, const std::vector<Obstacle>& obstacles,
                           const Vec3& wind, const LidarEffects& fog) {
  ControlSetpoint sp = e.setpoint;
  const FleetEntry& cfg = *e.cfg;
  if (cfg.avoidance && cfg.lidar && sp.mode == SetpointMode::kWaypoint && e.phase == PlanState::kEnroute) {
    const Vec3 to = sp.target - e.state.position;
    if (std::hypot(to.x(), to.y()) > 1.0) {
      const double yaw = yaw_of(e.state.attitude);
      const PointCloud cloud =
          scan_lidar(e.state.position, yaw, *cfg.lidar, obstacles, others, clock_.tick(), fog, e.lidar_rng.get());
      e.last_cloud = cloud.points.size();
      HistogramParams hp = cfg.avoidance->histogram;
      hp.heading_offset = yaw;
      const PolarHistogram hist = build_histogram(cloud, hp);
      const double target = wrap_bearing(std::atan2(to.y(), to.x()));
      const Steering s = select_heading(hist, target, cfg.avoidance->s_max);
      const double density = s.stop ? hist.threshold : hist.density[static_cast<std::size_t>(s.sector)];
      sp = avoidance_override(sp, s, target, density, cfg.avoidance->speed);
    }
  }
  const double dt = clock_.physics_dt();
  const bool pad_phase = e.phase == PlanState::kTakingOff || e.phase == PlanState::kLanding;
  for (int k = 0; k < clock_.physics_substeps(); ++k) {
    const MotorVector cmd = run_controller(e.state, sp, cfg.params, cfg.gains, dt);
    e.state = step_dynamics(e.state, cfg.params, cmd, wind, dt);
    double floor = 0.0;
    if (pad_phase) {
      const LocalPoint& pad = e.phase == PlanState::kTakingOff ? e.origin_pad : e.destination_pad;
      if (std::hypot(e.state.position.x() - pad.x(), e.state.position.y() - pad.y()) <
          0.5 * scenario_.traffic.pad_spacing)
        floor = pad.z();
    }
    if (e.state.position.z() < floor) {
      e.state.position.z() = floor;
      e.state.velocity = Vec3::Zero();
      e.state.angular_rate = Vec3::Zero();
      if (!pad_phase) e.touched_ground = true;
    }
  }
}

void Engine::collisions(Tick now) {
  std::vector<CollisionBody> bodies;
  bodies.reserve(entities_.size());
  for (auto& [id, e] : entities_) {
    CollisionBody b;
    b.uav = id;
    b.position = e.state.position;
    b.radius = e.cfg->params.body_radius;
    b.ground_exempt = e.phase == PlanState::kTakingOff || e.phase == PlanState::kLanding;
    b.touched_ground = e.touched_ground;
    e.touched_ground = false;
    bodies.push_back(b);
  }
  std::vector<Obstacle> obstacles = scenario_.obstacles;
  const auto& spawned = anomalies_.obstacles();
  obstacles.insert(obstacles.end(), spawned.begin(), spawned.end());
  double max_radius = 1.0;
  for (const auto& [id, w] : scenario_.network.airways) max_radius = std::max(max_radius, w.corridor_radius);
  const auto found = detect_collisions(bodies, obstacles, 2.0 * max_radius, now);

  // Only the onset of a contact is an event.
  std::set<std::vector<std::uint32_t>> current;
  for (const auto& c : found) {
    std::vector<std::uint32_t> key = {static_cast<std::uint32_t>(c.kind)};
    key.insert(key.end(), c.entities.begin(), c.entities.end());
    current.insert(key);
    if (contact_keys_.count(key)) continue;
    collision_log_.push_back(c);
    monitor_.record_collision();
    event(collision_to_json(c));
  }
  contact_keys_ = std::move(current);

  std::vector<LocalPoint> airborne;
  for (const auto& [id, e] : entities_)
    if (e.state.position.z() > 0.5) airborne.push_back(e.state.position);
  if (airborne.size() >= 2) {
    const double d = closest_pair(airborne, std::max(1.0, scenario_.traffic.s_min));
    if (d >= 0.0 && (min_separation_ < 0.0 || d < min_separation_)) min_separation_ = d;
  }
}

void Engine::telemetry(Tick now) {
  const bool log = now % scenario_.clock.telemetry_every == 0;
  for (const auto& [id, e] : entities_) {
    const auto& s = e.state;
    monitor_.observe(now, id, s.position, e.airway);
    nlohmann::json t = {{"uav", id},
                        {"tick", now},
                        {"position", vec_json(s.position)},
                        {"velocity", vec_json(s.velocity)},
                        {"attitude", {s.attitude.w(), s.attitude.x(), s.attitude.y(), s.attitude.z()}},
                        {"motors", {s.motor_speed[0], s.motor_speed[1], s.motor_speed[2], s.motor_speed[3]}},
                        {"health", {s.health[0], s.health[1], s.health[2], s.health[3]}},
                        {"plan", e.plan},
                        {"state", plan_state_name(e.phase)},
                        {"airway", e.airway}};
    if (log && telemetry_log_.is_open()) telemetry_log_ << t.dump() << '\n';
    if (log) frame("telemetry", now, t);
    bus_.publish("uav/telemetry/" + std::to_string(id), std::move(t), now);
  }
}

bool Engine::done() const {
  if (!entities_.empty()) return false;
  for (const auto& [id, m] : missions_) {
    const PlanState s = plan_state_from(m.state);
    if (!is_terminal(s)) return false;
  }
  return true;
}

bool Engine::step() {
  if (finished_) return false;
  const Tick now = clock_.tick();
  if (!started_) {
    started_ = true;
    wall_start_ = std::chrono::steady_clock::now();
    if (!options_.out_dir.empty()) {
      std::filesystem::create_directories(options_.out_dir);
      telemetry_log_.open(std::filesystem::path(options_.out_dir) / "telemetry.jsonl", std::ios::trunc);
      event_log_.open(std::filesystem::path(options_.out_dir) / "events.jsonl", std::ios::trunc);
      if (!telemetry_log_ || !event_log_) throw ValidationError("cannot open log files in '" + options_.out_dir + "'");
    }
    for (int r = 0; r < 2; ++r) {
      if (external_[r]) {
        for (const auto& topic : role_inbound(static_cast<Role>(r))) external_subs_[r].push_back(bus_.subscribe(topic));
      }
    }
    if (!external_[0]) {
      authority_ = std::make_unique<ControlAuthority>(scenario_.network, scenario_.no_fly_zones, scenario_.policy);
      authority_->attach(bus_);
      anomalies_.set_airspace_hook([this](const nlohmann::json& o, Tick t) {
        return authority_->issue_airspace_control(order_from_json(o), t).affected;
      });
    }
    if (!external_[1]) {
      traffic_ = std::make_unique<TrafficManager>(scenario_);
      traffic_->attach(bus_);
    }
    if (scenario_.demands.empty()) {
      stop_reason_ = "empty";
      finished_ = true;
      return false;
    }
  }
  if (stop_request_) {
    stop_reason_ = *stop_request_;
    finished_ = true;
    return false;
  }
  const auto tick_start = std::chrono::steady_clock::now();

  deliver(now);

  anomalies_.step(now);
  for (auto& ev : anomalies_.take_events()) {
    ev["tick"] = now;
    event(ev);
  }

  run_role(Role::kAuthority, now);
  run_role(Role::kTraffic, now);

  // Per-vehicle phases against a snapshot of the world at tick start.
  const Vec3 wind = anomalies_.wind();
  const LidarEffects fog = anomalies_.lidar_effects();
  std::vector<Obstacle> obstacles = scenario_.obstacles;
  const auto& spawned = anomalies_.obstacles();
  obstacles.insert(obstacles.end(), spawned.begin(), spawned.end());
  std::vector<Entity*> list;
  std::vector<Sphere> spheres;
  for (auto& [id, e] : entities_) {
    e.state.health = anomalies_.health(id);
    list.push_back(&e);
    spheres.push_back({e.state.position, e.cfg->params.body_radius});
  }
  std::vector<std::string> errors(list.size());
  pool_->parallel_for(list.size(), [&](std::size_t i) {
    try {
      std::vector<Sphere> others;
      if (list[i]->cfg->lidar) {
        others.reserve(spheres.size());
        for (std::size_t j = 0; j < spheres.size(); ++j)
          if (j != i) others.push_back(spheres[j]);
      }
      update_entity(*list[i], others, obstacles, wind, fog);
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  });
  for (std::size_t i = 0; i < list.size(); ++i)
    if (!errors[i].empty()) throw NumericError("uav " + std::to_string(list[i]->uav) + ": " + errors[i]);

  collisions(now);
  peak_active_ = std::max(peak_active_, entities_.size());
  telemetry(now);
  if (now % scenario_.policy.stats_every == 0 && now > 0) frame("stats", now, stats_to_json(monitor_.stats()));
  if (event_log_.is_open()) event_log_.flush();

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - tick_start).count();
  if (entities_.size() >= options_.loaded_threshold) {
    ++perf_.loaded_ticks;
    loaded_seconds_ += secs;
  }
  clock_.advance();

  if (done()) {
    stop_reason_ = "all_terminal";
    finished_ = true;
  } else if (options_.until && clock_.tick() >= *options_.until) {
    stop_reason_ = "until";
    finished_ = true;
  } else if (clock_.tick() >= scenario_.clock.max_ticks) {
    stop_reason_ = "max_ticks";
    finished_ = true;
  }
  return !finished_;
}

RunReport Engine::run() {
  while (step()) {
  }
  return finish();
}

RunReport Engine::finish() {
  if (finalized_) return report_;
  finalized_ = true;
  finished_ = true;
  const double wall = started_ ? std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start_).count() : 0.0;

  RunReport& r = report_;
  r.ticks = clock_.tick();
  r.stop_reason = stop_reason_.empty() ? "stopped" : stop_reason_;
  r.all_terminal = done();
  r.stats = monitor_.stats();
  r.collisions = collision_log_;
  for (const auto& [id, m] : missions_) r.missions.push_back(m);
  r.anomalies = anomalies_.log();
  r.anomaly_rejections = anomalies_.rejections();
  r.replans = replans_;
  r.peak_active = peak_active_;
  r.min_separation = min_separation_;

  perf_.wall_seconds = wall;
  perf_.ticks = r.ticks;
  perf_.ticks_per_second = wall > 0.0 ? static_cast<double>(r.ticks) / wall : 0.0;
  perf_.peak_active = peak_active_;
  perf_.loaded_threshold = options_.loaded_threshold;
  perf_.loaded_ticks_per_second = loaded_seconds_ > 0.0 ? static_cast<double>(perf_.loaded_ticks) / loaded_seconds_ : 0.0;
  perf_.threads = options_.threads;

  if (!options_.out_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(options_.out_dir);
    fs::create_directories(dir);
    r.logs = {{"telemetry", "telemetry.jsonl"},
              {"events", "events.jsonl"},
              {"stats", "stats.json"},
              {"report", "report.json"},
              {"perf", "perf.json"}};
    telemetry_log_.close();
    event_log_.close();
    std::ofstream(dir / "stats.json") << stats_to_json(r.stats).dump(2) << '\n';
    std::ofstream(dir / "report.json") << report_to_json(r).dump(2) << '\n';
    std::ofstream(dir / "perf.json") << perf_to_json(perf_).dump(2) << '\n';
  }
  // Run caches are released once results are out.
  entities_.clear();
  contact_keys_.clear();
  return r;
}

}  // namespace skylane
