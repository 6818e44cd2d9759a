#include "skylane/gateway/gateway.hpp"

#include <algorithm>
#include <chrono>

#include <httplib.h>

#include "skylane/airway/network.hpp"
#include "skylane/errors.hpp"

namespace skylane {
namespace {

ApiResponse error_response(const std::string& code, const std::string& message) {
  ApiResponse r;
  r.ok = false;
  r.code = code;
  r.message = message;
  return r;
}

ApiResponse ok_response(nlohmann::json body = nlohmann::json::object()) {
  ApiResponse r;
  r.body = std::move(body);
  return r;
}

int http_status(const ApiResponse& r) {
  if (r.ok) return 200;
  if (r.code == "auth") return 401;
  if (r.code == "protocol") return 400;
  if (r.code == "state") return 409;
  if (r.code == "invalid") return 422;
  return 500;
}

const std::set<std::string>& known_verbs() {
  static const std::set<std::string> verbs = {
      "scenario.load", "sim.start", "sim.pause",    "sim.resume",     "sim.stop",
      "sim.status",    "network.get", "plan.submit", "plan.query",    "uav.command",
      "uav.telemetry.subscribe",     "anomaly.inject", "airspace.control", "stats.get"};
  return verbs;
}

bool token_matches(const std::string& expected, const std::string& given) {
  if (expected.size() != given.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < expected.size(); ++i)
    diff |= static_cast<unsigned char>(expected[i] ^ given[i]);
  return diff == 0;
}

Role role_from(const std::string& s) {
  if (s == "authority") return Role::kAuthority;
  if (s == "traffic") return Role::kTraffic;
  throw ValidationError("role must be 'authority' or 'traffic'");
}

nlohmann::json event_frame(Tick tick, nlohmann::json payload) {
  return {{"kind", "event"}, {"tick", tick}, {"payload", std::move(payload)}};
}

}  // namespace

const char* gateway_state_name(GatewayState s) {
  switch (s) {
    case GatewayState::kIdle: return "idle";
    case GatewayState::kLoaded: return "loaded";
    case GatewayState::kRunning: return "running";
    case GatewayState::kPaused: return "paused";
    case GatewayState::kFinished: return "finished";
    case GatewayState::kError: return "error";
  }
  return "?";
}

nlohmann::json response_to_json(const ApiResponse& r) {
  nlohmann::json j = {{"id", r.id}, {"ok", r.ok}};
  if (r.ok) {
    j["body"] = r.body;
  } else {
    j["error"] = {{"code", r.code}, {"message", r.message}};
    if (!r.body.empty()) j["body"] = r.body;
  }
  return j;
}

ApiRequest request_from_line(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("request must be an object");
  ApiRequest r;
  if (j.contains("id")) r.id = j["id"];
  if (!j.contains("verb") || !j["verb"].is_string()) throw ValidationError("request needs a string 'verb'");
  r.verb = j["verb"].get<std::string>();
  if (j.contains("body")) r.body = j["body"];
  if (j.contains("token") && j["token"].is_string()) r.token = j["token"].get<std::string>();
  return r;
}

nlohmann::json echo_authority(Tick tick, const nlohmann::json& messages) {
  std::vector<PlanRequest> requests;
  for (const auto& m : messages) {
    if (m.value("topic", std::string()) != "plan/submit") continue;
    try {
      requests.push_back(request_from_json(m.at("payload")));
    } catch (const std::exception&) {
    }
  }
  std::stable_sort(requests.begin(), requests.end(),
                   [](const PlanRequest& a, const PlanRequest& b) { return a.plan < b.plan; });
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : requests) {
    ApprovalDecision d;
    d.plan = r.plan;
    d.verdict = Verdict::kApproved;
    d.assigned_departure = std::max(r.requested_departure, tick);
    out.push_back({{"topic", "plan/decision"}, {"payload", decision_to_json(d)}});
  }
  return out;
}

ExternalClient::ExternalClient(const std::string& host, int port, const std::string& token, Role role,
                               std::vector<std::string> topics)
    : socket_(LineSocket::connect(host, port)) {
  nlohmann::json hello = {{"type", "attach"}, {"role", role_name(role)}, {"token", token}};
  if (!topics.empty()) hello["topics"] = topics;
  if (!socket_->write_line(hello.dump())) throw SchedulingError("attach: gateway hung up");
  const auto line = socket_->read_line(10.0);
  if (!line) throw SchedulingError("attach: no reply from gateway");
  const auto reply = nlohmann::json::parse(*line, nullptr, false);
  if (reply.is_discarded() || reply.value("type", std::string()) != "attached") {
    const std::string why = reply.is_discarded() ? *line : reply.value("message", reply.dump());
    throw SchedulingError("attach refused: " + why);
  }
}

bool ExternalClient::serve_one(const Handler& handler) {
  for (;;) {
    const auto line = socket_->read_line();
    if (!line) return false;
    const auto msg = nlohmann::json::parse(*line, nullptr, false);
    if (msg.is_discarded() || msg.value("type", std::string()) != "tick") continue;
    const Tick tick = msg.at("tick").get<Tick>();
    nlohmann::json publish = handler(tick, msg.value("messages", nlohmann::json::array()));
    nlohmann::json ack = {{"type", "ack"}, {"tick", tick}, {"publish", std::move(publish)}};
    return socket_->write_line(ack.dump());
  }
}

void ExternalClient::run(const Handler& handler) {
  while (serve_one(handler)) {
  }
}

void ExternalClient::close() { socket_->shutdown(); }

class Gateway::SocketPeer : public ExternalPeer {
 public:
  SocketPeer(std::shared_ptr<LineSocket> socket, Role role, std::vector<std::string> topics)
      : socket_(std::move(socket)), role_(role), topics_(std::move(topics)) {}

  Outbound exchange(Role role, Tick tick, const std::vector<Envelope>& inbound) override {
    nlohmann::json msgs = nlohmann::json::array();
    for (const Envelope& e : inbound) {
      if (!wanted(e.topic)) continue;
      msgs.push_back({{"topic", e.topic},
                      {"payload", e.payload},
                      {"publish_tick", e.publish_tick},
                      {"deliver_tick", e.deliver_tick},
                      {"sequence", e.sequence}});
    }
    const nlohmann::json out = {{"type", "tick"}, {"role", role_name(role)}, {"tick", tick}, {"messages", msgs}};
    if (!socket_->write_line(out.dump())) throw SchedulingError(std::string("external ") + role_name(role) + " disconnected");
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    for (;;) {
      const double left = std::chrono::duration<double>(deadline - std::chrono::steady_clock::now()).count();
      const auto line = left > 0.0 ? socket_->read_line(left) : std::nullopt;
      if (!line) {
        if (left <= 0.0 || socket_->timed_out()) throw SchedulingError("external timeout");
        throw SchedulingError(std::string("external ") + role_name(role) + " disconnected");
      }
      const auto ack = nlohmann::json::parse(*line, nullptr, false);
      if (ack.is_discarded() || ack.value("type", std::string()) != "ack") continue;
      if (!ack.contains("tick") || !ack["tick"].is_number_integer() || ack["tick"].get<Tick>() != tick) continue;
      Outbound result;
      for (const auto& p : ack.value("publish", nlohmann::json::array())) {
        const std::string topic = p.at("topic").get<std::string>();
        validate_topic(topic);
        result.emplace_back(topic, p.value("payload", nlohmann::json::object()));
      }
      return result;
    }
  }

  Role role() const { return role_; }
  void shutdown() { socket_->shutdown(); }
  double timeout_s = 5.0;

 private:
  bool wanted(const std::string& topic) const {
    if (topics_.empty()) return true;
    return std::any_of(topics_.begin(), topics_.end(), [&](const std::string& p) { return topic_matches(p, topic); });
  }

  std::shared_ptr<LineSocket> socket_;
  Role role_;
  std::vector<std::string> topics_;
};

struct Gateway::Client {
  std::shared_ptr<LineSocket> socket;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> queue;
  std::size_t bytes = 0;
  bool closed = false;
  bool telemetry = false;
  std::set<UavId> uavs;  // empty: every vehicle
  std::thread writer;

  bool push(std::string line, std::size_t limit) {
    std::lock_guard lk(mu);
    if (closed) return false;
    if (bytes + line.size() > limit) {
      closed = true;
      socket->shutdown();
      cv.notify_all();
      return false;
    }
    bytes += line.size();
    queue.push_back(std::move(line));
    cv.notify_all();
    return true;
  }

  void write_loop() {
    for (;;) {
      std::string line;
      {
        std::unique_lock lk(mu);
        cv.wait(lk, [&] { return closed || !queue.empty(); });
        if (queue.empty()) return;
        line = std::move(queue.front());
        queue.pop_front();
        bytes -= line.size();
      }
      if (!socket->write_line(line)) {
        std::lock_guard lk(mu);
        closed = true;
        return;
      }
    }
  }

  void close() {
    {
      std::lock_guard lk(mu);
      closed = true;
      cv.notify_all();
    }
    socket->shutdown();
    if (writer.joinable()) writer.join();
  }
};

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)) {
  if (options_.token.empty()) throw ValidationError("gateway token is required (set SKYLANE_TOKEN)");
  if (options_.threads < 1) throw ValidationError("threads must be >= 1");
  if (options_.pace < 0.0) throw ValidationError("pace must be >= 0");
  refresh_status();
  sim_thread_ = std::thread([this] { sim_loop(); });
}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  if (started_) return;
  started_ = true;
  if (options_.stream_port >= 0) {
    stream_ = std::make_unique<StreamServer>(options_.host, options_.stream_port,
                                             [this](std::shared_ptr<LineSocket> s) { on_connection(std::move(s)); });
  }
  if (options_.http_port >= 0) {
    http_ = std::make_unique<httplib::Server>();
    http_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Authorization, Content-Type, X-Request-Id"}});
    http_->Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    auto serve = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest r;
      r.verb = req.matches[1];
      if (req.has_header("X-Request-Id")) r.id = req.get_header_value("X-Request-Id");
      const std::string auth = req.get_header_value("Authorization");
      if (auth.rfind("Bearer ", 0) == 0) r.token = auth.substr(7);
      ApiResponse resp;
      if (!req.body.empty()) {
        auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
          resp = error_response("protocol", "body is not valid JSON");
          resp.id = r.id;
        } else {
          r.body = std::move(body);
        }
      }
      if (resp.ok) resp = handle(r);
      res.status = http_status(resp);
      res.set_content(response_to_json(resp).dump(), "application/json");
    };
    http_->Post(R"(/api/([A-Za-z._]+))", serve);
    http_->Get(R"(/api/(sim\.status))", serve);
    if (options_.http_port == 0) {
      http_port_ = http_->bind_to_any_port(options_.host);
    } else {
      http_port_ = http_->bind_to_port(options_.host, options_.http_port) ? options_.http_port : -1;
    }
    if (http_port_ < 0) throw SchedulingError("cannot bind http port " + std::to_string(options_.http_port));
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  }
}

void Gateway::stop() {
  if (stopped_) return;
  stopped_ = true;
  if (http_) {
    http_->stop();
    if (http_thread_.joinable()) http_thread_.join();
  }
  if (stream_) stream_->stop();
  {
    std::lock_guard lk(clients_mu_);
    for (auto& c : clients_) c->close();
    clients_.clear();
  }
  {
    std::lock_guard lk(mu_);
    for (auto& p : peers_)
      if (p) p->shutdown();
    sim_stop_ = true;
    cv_.notify_all();
  }
  if (sim_thread_.joinable()) sim_thread_.join();
}

void Gateway::serve_forever() {
  start();
  while (!shutdown_requested_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  stop();
}

GatewayState Gateway::state() const {
  std::lock_guard lk(mu_);
  return state_;
}

GatewayState Gateway::wait_done(double timeout_s) {
  std::unique_lock lk(mu_);
  done_cv_.wait_for(lk, std::chrono::duration<double>(timeout_s),
                    [&] { return state_ != GatewayState::kRunning && state_ != GatewayState::kPaused; });
  return state_;
}

std::optional<RunReport> Gateway::report() const {
  std::lock_guard lk(mu_);
  return report_;
}

std::string Gateway::error() const {
  std::lock_guard lk(mu_);
  return error_;
}

void Gateway::load_scenario_file(const std::string& path, std::optional<std::uint64_t> seed,
                                 std::optional<Tick> until) {
  nlohmann::json body = {{"path", path}};
  if (seed) body["seed"] = *seed;
  if (until) body["until"] = *until;
  const ApiResponse r = enqueue([this, body] { return do_load(body); });
  if (!r.ok) {
    std::string msg = r.message;
    if (r.body.contains("violations"))
      for (const auto& v : r.body["violations"]) msg += "\n  " + v.value("rule", "") + ": " + v.value("message", "");
    throw ValidationError(msg);
  }
}

ApiResponse Gateway::handle(const ApiRequest& request) { return guarded(request, nullptr); }

ApiResponse Gateway::guarded(const ApiRequest& request, Client* client) {
  ApiResponse r;
  try {
    r = dispatch(request, client);
  } catch (const ValidationError& e) {
    r = error_response("invalid", e.what());
  } catch (const LookupError& e) {
    r = error_response("invalid", e.what());
  } catch (const std::exception& e) {
    r = error_response("internal", e.what());
  }
  r.id = request.id;
  return r;
}

ApiResponse Gateway::dispatch(const ApiRequest& req, Client* client) {
  const std::string& v = req.verb;
  if (v == "sim.status") {
    std::lock_guard lk(mu_);
    return ok_response(status_);
  }
  if (!token_matches(options_.token, req.token)) return error_response("auth", "missing or wrong token");
  if (!known_verbs().count(v)) return error_response("protocol", "unknown verb '" + v + "'");
  if (!req.body.is_object()) return error_response("protocol", "body must be an object");
  const nlohmann::json body = req.body;

  if (v == "uav.telemetry.subscribe") {
    if (!client) return error_response("protocol", "uav.telemetry.subscribe needs a stream connection");
    std::set<UavId> uavs;
    if (body.contains("uavs")) {
      if (!body["uavs"].is_array()) return error_response("invalid", "'uavs' must be an array of ids");
      for (const auto& u : body["uavs"]) {
        if (!u.is_number_integer() || u.get<std::int64_t>() < 0) return error_response("invalid", "'uavs' must be an array of ids");
        uavs.insert(u.get<UavId>());
      }
    }
    const bool enabled = body.value("enabled", true);
    std::lock_guard lk(client->mu);
    client->telemetry = enabled;
    client->uavs = uavs;
    return ok_response({{"telemetry", enabled}, {"uavs", uavs}});
  }
  if (v == "scenario.load") return enqueue([this, body] { return do_load(body); });
  if (v == "sim.start") return enqueue([this] { return do_start(); });
  if (v == "sim.pause") return enqueue([this] { return do_pause(true); });
  if (v == "sim.resume") return enqueue([this] { return do_pause(false); });
  if (v == "sim.stop") return enqueue([this] { return do_stop(); });
  if (v == "network.get") return enqueue([this] { return do_network(); });
  if (v == "plan.query") return enqueue([this, body] { return do_plan_query(body); });
  if (v == "stats.get") return enqueue([this] { return do_stats(); });
  if (v == "plan.submit") {
    request_from_json(body);
    return enqueue([this, body] { return do_publish("plan/submit", body); });
  }
  if (v == "uav.command") {
    const UavCommand c = command_from_json(body);
    return enqueue([this, body, c] { return do_publish("uav/cmd/" + std::to_string(c.uav), body); });
  }
  if (v == "anomaly.inject") return enqueue([this, body] { return do_publish("anomaly/inject", body); });
  if (v == "airspace.control") {
    order_from_json(body);
    return enqueue([this, body] { return do_publish("control/order", body); });
  }
  return error_response("protocol", "unknown verb '" + v + "'");
}

ApiResponse Gateway::enqueue(std::function<ApiResponse()> fn) {
  auto cmd = std::make_shared<Command>();
  cmd->fn = std::move(fn);
  auto fut = cmd->done.get_future();
  {
    std::lock_guard lk(mu_);
    if (sim_stop_) return error_response("internal", "gateway is stopping");
    queue_.push_back(cmd);
    cv_.notify_all();
  }
  return fut.get();
}

void Gateway::sim_loop() {
  using Clock = std::chrono::steady_clock;
  auto next_step = Clock::now();
  for (;;) {
    std::deque<std::shared_ptr<Command>> batch;
    bool stopping = false;
    {
      std::unique_lock lk(mu_);
      for (;;) {
        if (sim_stop_ || !queue_.empty()) break;
        if (state_ == GatewayState::kRunning) {
          if (options_.pace <= 0.0 || Clock::now() >= next_step) break;
          cv_.wait_until(lk, next_step);
          continue;
        }
        cv_.wait(lk);
      }
      stopping = sim_stop_;
      batch.swap(queue_);
    }
    for (auto& cmd : batch) {
      if (stopping) {
        cmd->done.set_value(error_response("internal", "gateway is stopping"));
        continue;
      }
      ApiResponse r;
      try {
        r = cmd->fn();
      } catch (const ValidationError& e) {
        r = error_response("invalid", e.what());
      } catch (const LookupError& e) {
        r = error_response("invalid", e.what());
      } catch (const std::exception& e) {
        r = error_response("internal", e.what());
      }
      cmd->done.set_value(std::move(r));
    }
    if (stopping) {
      if (engine_ && (state_ == GatewayState::kRunning || state_ == GatewayState::kPaused)) {
        try {
          engine_->request_stop("stopped");
          engine_->step();
          finish_run();
        } catch (const std::exception& e) {
          fail_run(e.what());
        }
      }
      return;
    }
    if (state_ == GatewayState::kRunning && (options_.pace <= 0.0 || Clock::now() >= next_step)) {
      step_once();
      if (options_.pace > 0.0 && engine_) {
        const double dt = options_.pace / engine_->scenario().clock.tick_rate;
        next_step = std::max(next_step + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(dt)),
                             Clock::now() - std::chrono::seconds(1));
      }
    }
  }
}

void Gateway::step_once() {
  try {
    if (!engine_->step()) {
      finish_run();
      return;
    }
  } catch (const std::exception& e) {
    fail_run(e.what());
    return;
  }
  refresh_status();
}

void Gateway::finish_run() {
  RunReport rep = engine_->finish();
  fan_out(event_frame(engine_->now(),
                      {{"type", "run_finished"}, {"stop_reason", rep.stop_reason}, {"ticks", rep.ticks}}));
  {
    std::lock_guard lk(mu_);
    report_ = std::move(rep);
    state_ = GatewayState::kFinished;
    for (auto& p : peers_) p.reset();
    refresh_status_locked();
    done_cv_.notify_all();
  }
}

void Gateway::fail_run(const std::string& message) {
  try {
    engine_->request_stop("error");
    engine_->finish();
  } catch (const std::exception&) {
  }
  fan_out(event_frame(engine_->now(), {{"type", "run_error"}, {"message", message}}));
  {
    std::lock_guard lk(mu_);
    error_ = message;
    state_ = GatewayState::kError;
    for (auto& p : peers_) p.reset();
    refresh_status_locked();
    done_cv_.notify_all();
  }
}

void Gateway::refresh_status() {
  std::lock_guard lk(mu_);
  refresh_status_locked();
}

void Gateway::refresh_status_locked() {
  nlohmann::json s = {{"state", gateway_state_name(state_)}};
  if (engine_) {
    s["tick"] = engine_->now();
    s["active"] = engine_->active_count();
    s["map"] = engine_->scenario().map_name;
    s["demands"] = engine_->scenario().demands.size();
  }
  if (report_) s["stop_reason"] = report_->stop_reason;
  if (!error_.empty()) s["error"] = error_;
  nlohmann::json attached = nlohmann::json::array();
  for (int r = 0; r < 2; ++r)
    if (peers_[r]) attached.push_back(role_name(static_cast<Role>(r)));
  s["external"] = attached;
  status_ = std::move(s);
}

void Gateway::fan_out(const nlohmann::json& frame) {
  std::lock_guard lk(clients_mu_);
  if (clients_.empty()) return;
  const bool telemetry = frame.value("kind", std::string()) == "telemetry";
  const UavId uav = telemetry ? frame["payload"].value("uav", UavId{0}) : 0;
  std::string line;
  for (auto& c : clients_) {
    if (telemetry) {
      std::lock_guard clk(c->mu);
      if (!c->telemetry || (!c->uavs.empty() && !c->uavs.count(uav))) continue;
    }
    if (line.empty()) {
      nlohmann::json f = frame;
      f["type"] = "frame";
      line = f.dump();
    }
    c->push(line, options_.client_buffer_bytes);
  }
}

ApiResponse Gateway::do_load(const nlohmann::json& body) {
  if (state_ == GatewayState::kRunning || state_ == GatewayState::kPaused)
    return error_response("state", "a run is in progress; stop it first");
  Scenario s;
  if (body.contains("path")) {
    s = load_scenario(body.at("path").get<std::string>());
  } else if (body.contains("scenario")) {
    s = scenario_from_json(body["scenario"]);
  } else {
    return error_response("invalid", "scenario.load needs 'path' or 'scenario'");
  }
  EngineOptions opt;
  if (body.contains("seed")) opt.seed = body["seed"].get<std::uint64_t>();
  if (body.contains("until")) {
    if (!body["until"].is_number_integer() || body["until"].get<std::int64_t>() <= 0)
      return error_response("invalid", "'until' must be a positive integer");
    opt.until = body["until"].get<Tick>();
  }
  if (body.contains("subsystems")) {
    const auto& sub = body["subsystems"];
    auto mode = [&](const char* key, SubsystemMode cur) {
      if (!sub.contains(key)) return cur;
      const std::string m = sub[key].get<std::string>();
      if (m == "builtin") return SubsystemMode::kBuiltin;
      if (m == "external") return SubsystemMode::kExternal;
      throw ValidationError(std::string("subsystems.") + key + " must be 'builtin' or 'external'");
    };
    s.subsystems.authority = mode("authority", s.subsystems.authority);
    s.subsystems.traffic = mode("traffic", s.subsystems.traffic);
    s.subsystems.external_timeout_s = sub.value("timeout_s", s.subsystems.external_timeout_s);
    if (!(s.subsystems.external_timeout_s > 0.0)) return error_response("invalid", "subsystems.timeout_s must be > 0");
  }
  if (opt.seed) s.seed = *opt.seed;
  const auto violations = validate_scenario(s);
  if (!violations.empty()) {
    ApiResponse r = error_response("invalid", "scenario has " + std::to_string(violations.size()) + " violation(s)");
    nlohmann::json list = nlohmann::json::array();
    for (const auto& v : violations) list.push_back({{"rule", v.rule}, {"message", v.message}});
    r.body = {{"violations", list}};
    return r;
  }
  opt.out_dir = options_.out_dir;
  opt.threads = options_.threads;
  auto engine = std::make_unique<Engine>(std::move(s), opt);
  engine->set_frame_sink([this](const nlohmann::json& f) { fan_out(f); });
  engine_ = std::move(engine);
  {
    std::lock_guard lk(mu_);
    state_ = GatewayState::kLoaded;
    report_.reset();
    error_.clear();
  }
  refresh_status();
  const Scenario& sc = engine_->scenario();
  auto mode_name = [](SubsystemMode m) { return m == SubsystemMode::kBuiltin ? "builtin" : "external"; };
  return ok_response({{"map", sc.map_name},
                      {"seed", sc.seed},
                      {"nodes", sc.network.nodes.size()},
                      {"airports", sc.network.airports.size()},
                      {"airways", sc.network.airways.size()},
                      {"fleet", sc.fleet.size()},
                      {"demands", sc.demands.size()},
                      {"subsystems",
                       {{"authority", mode_name(sc.subsystems.authority)},
                        {"traffic", mode_name(sc.subsystems.traffic)},
                        {"timeout_s", sc.subsystems.external_timeout_s}}}});
}

ApiResponse Gateway::do_start() {
  if (state_ != GatewayState::kLoaded) return error_response("state", "sim.start needs a loaded scenario");
  const SubsystemConfig& sub = engine_->scenario().subsystems;
  std::shared_ptr<SocketPeer> peers[2];
  {
    std::lock_guard lk(mu_);
    peers[0] = peers_[0];
    peers[1] = peers_[1];
  }
  const SubsystemMode modes[2] = {sub.authority, sub.traffic};
  for (int r = 0; r < 2; ++r) {
    if (modes[r] != SubsystemMode::kExternal) continue;
    if (!peers[r])
      return error_response("state", std::string("external ") + role_name(static_cast<Role>(r)) + " is not attached");
  }
  for (int r = 0; r < 2; ++r) {
    if (modes[r] != SubsystemMode::kExternal) continue;
    peers[r]->timeout_s = sub.external_timeout_s;
    engine_->attach_external(static_cast<Role>(r), peers[r].get());
  }
  {
    std::lock_guard lk(mu_);
    state_ = GatewayState::kRunning;
  }
  refresh_status();
  return ok_response({{"state", "running"}, {"tick", engine_->now()}});
}

ApiResponse Gateway::do_pause(bool pause) {
  const GatewayState from = pause ? GatewayState::kRunning : GatewayState::kPaused;
  if (state_ != from) return error_response("state", pause ? "not running" : "not paused");
  {
    std::lock_guard lk(mu_);
    state_ = pause ? GatewayState::kPaused : GatewayState::kRunning;
  }
  refresh_status();
  return ok_response({{"state", gateway_state_name(state_)}, {"tick", engine_->now()}});
}

ApiResponse Gateway::do_stop() {
  if (state_ != GatewayState::kRunning && state_ != GatewayState::kPaused && state_ != GatewayState::kLoaded)
    return error_response("state", "no run to stop");
  engine_->request_stop("stopped");
  engine_->step();
  finish_run();
  refresh_status();
  return ok_response({{"state", "finished"}, {"tick", engine_->now()}});
}

ApiResponse Gateway::do_network() {
  if (!engine_) return error_response("state", "no scenario loaded");
  const nlohmann::json doc = scenario_to_json(engine_->scenario());
  nlohmann::json out = {{"network", network_to_json(engine_->scenario().network)}};
  for (const char* key : {"datum", "map", "no_fly_zones"})
    if (doc.contains(key)) out[key] = doc[key];
  return ok_response(std::move(out));
}

ApiResponse Gateway::do_publish(const std::string& topic, const nlohmann::json& payload) {
  if (state_ != GatewayState::kLoaded && state_ != GatewayState::kRunning && state_ != GatewayState::kPaused)
    return error_response("state", "no live run");
  const Envelope e = engine_->bus().publish(topic, payload, engine_->now());
  return ok_response({{"topic", topic}, {"tick", e.publish_tick}, {"sequence", e.sequence}});
}

ApiResponse Gateway::do_plan_query(const nlohmann::json& body) {
  if (!engine_) return error_response("state", "no scenario loaded");
  if (!body.contains("plan") || !body["plan"].is_number_integer() || body["plan"].get<std::int64_t>() < 0)
    return error_response("invalid", "plan.query needs a numeric 'plan'");
  return ok_response(engine_->plan_record(body["plan"].get<PlanId>()));
}

ApiResponse Gateway::do_stats() {
  if (!engine_) return error_response("state", "no scenario loaded");
  nlohmann::json out = {{"tick", engine_->now()}, {"active", engine_->active_count()},
                        {"stats", stats_to_json(engine_->stats())}};
  nlohmann::json bus = nlohmann::json::object();
  for (const auto& [prefix, c] : engine_->bus().counters())
    bus[prefix.empty() ? "default" : prefix] = {{"published", c.published},
                                                {"delivered", c.delivered},
                                                {"dropped_loss", c.dropped_loss},
                                                {"dropped_overflow", c.dropped_overflow}};
  out["bus"] = bus;
  std::lock_guard lk(mu_);
  if (report_) out["report"] = report_to_json(*report_);
  return ok_response(std::move(out));
}

void Gateway::on_connection(std::shared_ptr<LineSocket> socket) {
  const auto first = socket->read_line();
  if (!first) return;
  const auto j = nlohmann::json::parse(*first, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.value("type", std::string()) == "attach") {
    attach_peer(socket, j);
    return;
  }
  serve_client(socket, *first);
}

void Gateway::attach_peer(const std::shared_ptr<LineSocket>& socket, const nlohmann::json& hello) {
  auto refuse = [&](const std::string& code, const std::string& message) {
    socket->write_line(nlohmann::json{{"type", "error"}, {"code", code}, {"message", message}}.dump());
  };
  if (!token_matches(options_.token, hello.value("token", std::string()))) return refuse("auth", "missing or wrong token");
  Role role;
  std::vector<std::string> topics;
  try {
    role = role_from(hello.value("role", std::string()));
    for (const auto& t : hello.value("topics", nlohmann::json::array())) {
      const std::string p = t.get<std::string>();
      validate_pattern(p);
      topics.push_back(p);
    }
  } catch (const std::exception& e) {
    return refuse("protocol", e.what());
  }
  {
    std::lock_guard lk(mu_);
    if (state_ == GatewayState::kRunning || state_ == GatewayState::kPaused)
      return refuse("state", "attach before sim.start");
    const int r = static_cast<int>(role);
    if (peers_[r]) return refuse("state", std::string(role_name(role)) + " already attached");
    peers_[r] = std::make_shared<SocketPeer>(socket, role, std::move(topics));
  }
  refresh_status();
  socket->write_line(nlohmann::json{{"type", "attached"}, {"role", role_name(role)}}.dump());
}

void Gateway::serve_client(const std::shared_ptr<LineSocket>& socket, const std::string& first_line) {
  auto client = std::make_shared<Client>();
  client->socket = socket;
  client->writer = std::thread([c = client.get()] { c->write_loop(); });
  {
    std::lock_guard lk(clients_mu_);
    clients_.push_back(client);
  }
  std::optional<std::string> line = first_line;
  while (line) {
    if (!line->empty()) {
      ApiResponse resp;
      const auto j = nlohmann::json::parse(*line, nullptr, false);
      if (j.is_discarded()) {
        resp = error_response("protocol", "line is not valid JSON");
      } else {
        try {
          resp = guarded(request_from_line(j), client.get());
        } catch (const std::exception& e) {
          resp = error_response("protocol", e.what());
          if (j.is_object() && j.contains("id")) resp.id = j["id"];
        }
      }
      nlohmann::json out = response_to_json(resp);
      out["type"] = "response";
      if (!client->push(out.dump(), options_.client_buffer_bytes)) break;
    }
    line = socket->read_line();
  }
  {
    std::lock_guard lk(clients_mu_);
    clients_.remove(client);
  }
  client->close();
}

}  // namespace skylane
